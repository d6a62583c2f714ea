use std::collections::BTreeMap;

use crate::cell::Label;
use crate::store::PhaseDiagram;

/// Ordered points in `(gamma, kappa)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
}

type Key = (usize, usize);

/// Marching-squares boundary between cells whose dominant label lies in
/// `side_a` and cells whose dominant label lies in `side_b`. Squares with a
/// corner on neither side are skipped. Crossings sit at edge midpoints;
/// saddle squares connect around the `side_a` corners. Each polyline starts
/// at its end with the smaller `(gamma, kappa)`, and the list is sorted by
/// first point. A one-dimensional grid yields single-point polylines.
pub fn extract_boundary(diagram: &PhaseDiagram, side_a: &[Label], side_b: &[Label]) -> Vec<Polyline> {
    let spec = &diagram.spec;
    let (nk, ng) = (spec.kappa_grid.len(), spec.gamma_grid.len());
    let mut field: Vec<Option<bool>> = vec![None; nk * ng];
    for c in &diagram.cells {
        if c.index < field.len() {
            field[c.index] = c.dominant().and_then(|l| {
                if side_a.contains(&l) {
                    Some(true)
                } else if side_b.contains(&l) {
                    Some(false)
                } else {
                    None
                }
            });
        }
    }
    if !field.iter().any(|v| *v == Some(true)) || !field.iter().any(|v| *v == Some(false)) {
        return vec![];
    }
    // Doubled lattice: node (i, j) -> (2i, 2j) with i over gamma, j over kappa.
    let at = |i: usize, j: usize| field[i * nk + j];
    let coord = |x: usize, y: usize| -> (f64, f64) {
        let g = &spec.gamma_grid;
        let k = &spec.kappa_grid;
        let gx = if x % 2 == 0 { g[x / 2] } else { 0.5 * (g[x / 2] + g[x / 2 + 1]) };
        let ky = if y % 2 == 0 { k[y / 2] } else { 0.5 * (k[y / 2] + k[y / 2 + 1]) };
        (gx, ky)
    };
    let mut segments: Vec<(Key, Key)> = Vec::new();
    if nk == 1 || ng == 1 {
        let len = nk.max(ng);
        let node = |s: usize| if ng == 1 { at(0, s) } else { at(s, 0) };
        let mut out = Vec::new();
        for s in 0..len - 1 {
            if let (Some(a), Some(b)) = (node(s), node(s + 1)) {
                if a != b {
                    let key = if ng == 1 { (0, 2 * s + 1) } else { (2 * s + 1, 0) };
                    out.push(Polyline { points: vec![coord(key.0, key.1)] });
                }
            }
        }
        return out;
    }
    for i in 0..ng - 1 {
        for j in 0..nk - 1 {
            // Corners counter-clockwise from (i, j) in the (gamma, kappa) plane.
            let c = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            if c.iter().any(|v| v.is_none()) {
                continue;
            }
            let v: Vec<bool> = c.iter().map(|x| x.unwrap()).collect();
            let mids: [Key; 4] = [
                (2 * i + 1, 2 * j),
                (2 * i + 2, 2 * j + 1),
                (2 * i + 1, 2 * j + 2),
                (2 * i, 2 * j + 1),
            ];
            let crossing: Vec<usize> = (0..4).filter(|&e| v[e] != v[(e + 1) % 4]).collect();
            match crossing.len() {
                2 => segments.push((mids[crossing[0]], mids[crossing[1]])),
                4 => {
                    // Saddle: cut off each side_b corner so side_a stays connected.
                    for corner in 0..4 {
                        if !v[corner] {
                            segments.push((mids[(corner + 3) % 4], mids[corner]));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    chain(segments).into_iter().map(|keys| Polyline { points: keys.iter().map(|&(x, y)| coord(x, y)).collect() }).collect()
}

/// Links segments sharing endpoints into maximal chains.
fn chain(segments: Vec<(Key, Key)>) -> Vec<Vec<Key>> {
    let mut adj: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (s, (a, b)) in segments.iter().enumerate() {
        adj.entry(*a).or_default().push(s);
        adj.entry(*b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    // Open chains first (start at degree-1 endpoints), then closed loops.
    let starts: Vec<Key> = adj
        .iter()
        .filter(|(_, v)| v.len() == 1)
        .map(|(k, _)| *k)
        .chain(adj.keys().copied())
        .collect();
    for start in starts {
        let Some(&first) = adj[&start].iter().find(|&&s| !used[s]) else { continue };
        let mut path = vec![start];
        let mut cur = start;
        let mut seg = first;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            cur = if a == cur { b } else { a };
            path.push(cur);
            match adj[&cur].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        if path.last() < path.first() {
            path.reverse();
        }
        out.push(path);
    }
    out.sort();
    out
}

/// CSV with header `polyline,gamma,kappa`.
pub fn polylines_to_csv(lines: &[Polyline]) -> String {
    let mut s = String::from("polyline,gamma,kappa\n");
    for (n, l) in lines.iter().enumerate() {
        for (g, k) in &l.points {
            s.push_str(&format!("{n},{g},{k}\n"));
        }
    }
    s
}
