//! Marching-squares iso-lines on a rectangular grid.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourLine {
    pub level: f64,
    /// Each polyline is a list of `(x, y)` points.
    pub polylines: Vec<Vec<(f64, f64)>>,
}

type Point = (f64, f64);

fn lerp(a: Point, b: Point, va: f64, vb: f64, level: f64) -> Point {
    let t = if vb == va { 0.5 } else { (level - va) / (vb - va) };
    (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
}

/// Iso-lines of `values[i][j]` (sampled at `(xs[i], ys[j])`) at each level.
/// Non-finite cells are skipped.
pub fn contour_lines(xs: &[f64], ys: &[f64], values: &[Vec<f64>], levels: &[f64]) -> Vec<ContourLine> {
    levels
        .iter()
        .map(|&level| ContourLine {
            level,
            polylines: chain(segments(xs, ys, values, level)),
        })
        .collect()
}

fn segments(xs: &[f64], ys: &[f64], v: &[Vec<f64>], level: f64) -> Vec<(Point, Point)> {
    let mut out = Vec::new();
    if xs.len() < 2 || ys.len() < 2 {
        return out;
    }
    for i in 0..xs.len() - 1 {
        for j in 0..ys.len() - 1 {
            let corners = [
                ((xs[i], ys[j]), v[i][j]),
                ((xs[i + 1], ys[j]), v[i + 1][j]),
                ((xs[i + 1], ys[j + 1]), v[i + 1][j + 1]),
                ((xs[i], ys[j + 1]), v[i][j + 1]),
            ];
            if corners.iter().any(|c| !c.1.is_finite()) {
                continue;
            }
            let mut hits = Vec::with_capacity(4);
            for e in 0..4 {
                let (pa, va) = corners[e];
                let (pb, vb) = corners[(e + 1) % 4];
                if (va < level) != (vb < level) {
                    hits.push(lerp(pa, pb, va, vb, level));
                }
            }
            match hits.len() {
                2 => out.push((hits[0], hits[1])),
                4 => {
                    // saddle: resolve with the cell-centre value
                    let centre = corners.iter().map(|c| c.1).sum::<f64>() / 4.0;
                    if (centre < level) == (corners[0].1 < level) {
                        out.push((hits[0], hits[3]));
                        out.push((hits[1], hits[2]));
                    } else {
                        out.push((hits[0], hits[1]));
                        out.push((hits[2], hits[3]));
                    }
                }
                _ => {}
            }
        }
    }
    // a vertex lying exactly on the level yields zero-length pieces
    out.retain(|(a, b)| !same(*a, *b));
    out
}

fn same(a: Point, b: Point) -> bool {
    let tol = 1e-9 * (a.0.abs() + a.1.abs() + 1.0);
    (a.0 - b.0).abs() <= tol && (a.1 - b.1).abs() <= tol
}

/// Join segments sharing endpoints into polylines.
fn chain(mut segs: Vec<(Point, Point)>) -> Vec<Vec<Point>> {
    let mut lines = Vec::new();
    while let Some((a, b)) = segs.pop() {
        let mut line = vec![a, b];
        loop {
            let tail = *line.last().expect("non-empty");
            let head = line[0];
            if let Some(k) = segs.iter().position(|s| same(s.0, tail) || same(s.1, tail)) {
                let s = segs.swap_remove(k);
                line.push(if same(s.0, tail) { s.1 } else { s.0 });
            } else if let Some(k) = segs.iter().position(|s| same(s.0, head) || same(s.1, head)) {
                let s = segs.swap_remove(k);
                line.insert(0, if same(s.0, head) { s.1 } else { s.0 });
            } else {
                break;
            }
        }
        lines.push(line);
    }
    lines.sort_by(|p, q| p[0].partial_cmp(&q[0]).unwrap_or(std::cmp::Ordering::Equal));
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_is_one_closed_loop() {
        let xs: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        let v: Vec<Vec<f64>> = xs.iter().map(|x| xs.iter().map(|y| x * x + y * y).collect()).collect();
        let c = contour_lines(&xs, &xs, &v, &[1.0]);
        assert_eq!(c[0].polylines.len(), 1);
        let line = &c[0].polylines[0];
        assert!(same(line[0], *line.last().unwrap()));
        for p in line {
            assert!(((p.0 * p.0 + p.1 * p.1).sqrt() - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn straight_line_level() {
        let xs = [0.0, 1.0, 2.0];
        let v = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        let c = contour_lines(&xs, &[0.0, 1.0], &v, &[0.5, 5.0]);
        assert_eq!(c[0].polylines.len(), 1);
        for p in &c[0].polylines[0] {
            assert!((p.0 - 0.5).abs() < 1e-12);
        }
        assert!(c[1].polylines.is_empty());
    }
}
