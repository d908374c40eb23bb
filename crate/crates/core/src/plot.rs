//! SVG figures of N, the focal locus, the cut locus and sample geodesics,
//! projected onto the `x0, x1` plane.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::submanifold::NormalBundle;

pub type P2 = [f64; 2];

#[derive(Debug, Clone, Default)]
pub struct Figure {
    pub title: String,
    pub submanifold: Vec<Vec<P2>>,
    pub focal: Vec<P2>,
    pub cut: Vec<P2>,
    pub geodesics: Vec<Vec<P2>>,
}

const SIZE: f64 = 640.0;
const PAD: f64 = 40.0;

impl Figure {
    /// N and `count` geodesics, each drawn up to `stop(u)` (capped at `t_max`).
    pub fn from_bundle(
        bundle: &NormalBundle,
        title: &str,
        count: usize,
        t_max: f64,
        stop: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let sub = bundle.submanifold();
        let mut curves = Vec::new();
        if sub.dim() == 0 {
            let p = sub.point_at(&[]);
            curves.push(vec![[p[0], p[1]]]);
        } else {
            let (lo, hi) = sub.ranges()[0];
            let k = 400;
            let mut th = vec![0.0; sub.dim()];
            for (a, r) in sub.ranges().iter().enumerate().skip(1) {
                th[a] = 0.5 * (r.0 + r.1);
            }
            let pts: Vec<P2> = (0..=k)
                .map(|i| {
                    th[0] = lo + (hi - lo) * i as f64 / k as f64;
                    let p = sub.point_at(&th);
                    [p[0], p[1]]
                })
                .collect();
            curves.push(pts);
        }
        let sys = bundle.system();
        let mut geodesics = Vec::new();
        for u in bundle.ray_grid(count) {
            let t_end = stop(&u).min(t_max);
            if !(t_end > 0.0) {
                continue;
            }
            let un = bundle.unit_normal(&u)?;
            let flow = sys.integrate_geodesic(&un.base, &un.vector, t_end)?;
            geodesics.push(
                (0..=64)
                    .map(|i| {
                        let x = flow.position(t_end * i as f64 / 64.0);
                        [x[0], x[1]]
                    })
                    .collect(),
            );
        }
        Ok(Figure {
            title: title.into(),
            submanifold: curves,
            geodesics,
            ..Figure::default()
        })
    }

    fn bounds(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        let all = self
            .submanifold
            .iter()
            .flatten()
            .chain(&self.focal)
            .chain(&self.cut)
            .chain(self.geodesics.iter().flatten());
        for p in all.filter(|p| p[0].is_finite() && p[1].is_finite()) {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].min(p[1]);
            b[2] = b[2].max(p[0]);
            b[3] = b[3].max(p[1]);
        }
        if !b[0].is_finite() {
            return [-1.0, -1.0, 1.0, 1.0];
        }
        let span = (b[2] - b[0]).max(b[3] - b[1]).max(1e-9);
        let (cx, cy) = (0.5 * (b[0] + b[2]), 0.5 * (b[1] + b[3]));
        [cx - 0.55 * span, cy - 0.55 * span, cx + 0.55 * span, cy + 0.55 * span]
    }

    pub fn to_svg(&self) -> String {
        let [x0, y0, x1, _] = self.bounds();
        let scale = (SIZE - 2.0 * PAD) / (x1 - x0);
        let map = |p: &P2| -> (f64, f64) { (PAD + (p[0] - x0) * scale, SIZE - PAD - (p[1] - y0) * scale) };
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
            escape(&self.title)
        );
        let (ax, ay) = map(&[x0, y0]);
        let lim = SIZE - PAD;
        let _ = writeln!(
            s,
            r#"<g id="axes" stroke="black" stroke-width="1"><line x1="{ax:.3}" y1="{ay:.3}" x2="{lim:.3}" y2="{ay:.3}"/><line x1="{ax:.3}" y1="{ay:.3}" x2="{ax:.3}" y2="{PAD:.3}"/></g>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{ax:.3}" y="{:.3}" font-family="sans-serif" font-size="10">({}, {})</text>"#,
            ay + 14.0,
            short(x0),
            short(y0)
        );
        let poly = |s: &mut String, id: &str, pts: &[P2], stroke: &str, width: f64| {
            let d: Vec<String> = pts
                .iter()
                .filter(|p| p[0].is_finite() && p[1].is_finite())
                .map(|p| {
                    let (a, b) = map(p);
                    format!("{a:.3},{b:.3}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline class="{id}" points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
                d.join(" ")
            );
        };
        let _ = writeln!(s, r#"<g id="geodesics">"#);
        for g in &self.geodesics {
            poly(&mut s, "geodesic", g, "#9db4d0", 0.8);
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(s, r#"<g id="submanifold">"#);
        for c in &self.submanifold {
            if c.len() == 1 {
                let (a, b) = map(&c[0]);
                let _ = writeln!(s, r#"<circle cx="{a:.3}" cy="{b:.3}" r="4" fill="black"/>"#);
            } else {
                poly(&mut s, "submanifold", c, "black", 2.0);
            }
        }
        let _ = writeln!(s, "</g>");
        for (id, pts, colour, r) in [
            ("cut", &self.cut, "#2a9d4b", 1.6),
            ("focal", &self.focal, "#d0342c", 1.4),
        ] {
            let _ = writeln!(s, r#"<g id="{id}" fill="{colour}">"#);
            for p in pts.iter().filter(|p| p[0].is_finite() && p[1].is_finite()) {
                let (a, b) = map(p);
                let _ = writeln!(s, r#"<circle cx="{a:.3}" cy="{b:.3}" r="{r}"/>"#);
            }
            let _ = writeln!(s, "</g>");
        }
        s.push_str("</svg>\n");
        s
    }
}

/// `(x0, x1)` columns of a focal or cut table; rows with empty cells are skipped.
pub fn points_from_csv(text: &str) -> Result<Vec<P2>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let err = |e: csv::Error| Error::Scenario(e.to_string());
    let headers = r.headers().map_err(err)?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(a), Some(b)) = (col("x0"), col("x1")) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(err)?;
        let (Ok(x), Ok(y)) = (rec[a].parse::<f64>(), rec[b].parse::<f64>()) else {
            continue;
        };
        out.push([x, y]);
    }
    Ok(out)
}

fn short(x: f64) -> String {
    format!("{x:.3}")
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_figure_has_axes_only() {
        let s = Figure::default().to_svg();
        assert!(s.contains(r#"id="axes""#));
        assert!(!s.contains("<circle"));
        assert_eq!(s, Figure::default().to_svg());
    }

    #[test]
    fn points_are_drawn() {
        let f = Figure {
            title: "a < b".into(),
            focal: vec![[0.0, 0.0]],
            submanifold: vec![vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]],
            ..Figure::default()
        };
        let s = f.to_svg();
        assert_eq!(s.matches("<circle").count(), 1);
        assert!(s.contains("a &lt; b"));
    }

    #[test]
    fn reads_points_from_tables() {
        let t = "ray,u0,x0,x1\n0,1,0.5,-0.25\n1,2,,\n";
        assert_eq!(points_from_csv(t).unwrap(), vec![[0.5, -0.25]]);
    }
}
