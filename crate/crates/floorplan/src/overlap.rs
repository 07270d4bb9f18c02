//! Overlap-area measurement for sets of axis-aligned rectangles.

use crate::model::Rect;

/// Area of the intersection of two rectangles. Edge-touching rectangles have
/// zero intersection area and count as non-overlapping.
pub fn pairwise_overlap_area(a: &Rect, b: &Rect) -> f64 {
    let w = a.ux.min(b.ux) - a.lx.max(b.lx);
    let h = a.uy.min(b.uy) - a.ly.max(b.ly);
    if w > 0.0 && h > 0.0 {
        w * h
    } else {
        0.0
    }
}

/// Sum of pairwise intersection areas over all unordered pairs.
pub fn total_overlap(rects: &[Rect]) -> f64 {
    if rects.len() > 1000 {
        total_overlap_sweep(rects)
    } else {
        total_overlap_naive(rects)
    }
}

pub fn total_overlap_naive(rects: &[Rect]) -> f64 {
    let mut sum = 0.0;
    for i in 0..rects.len() {
        for j in i + 1..rects.len() {
            sum += pairwise_overlap_area(&rects[i], &rects[j]);
        }
    }
    sum
}

/// Plane sweep over x. At coverage count c a point contributes C(c,2) pair
/// overlaps, so the total equals the integral of (sum c^2 - sum c) / 2 taken
/// over y between consecutive x events.
pub fn total_overlap_sweep(rects: &[Rect]) -> f64 {
    let mut ys: Vec<f64> = Vec::with_capacity(rects.len() * 2);
    for r in rects {
        if r.width() > 0.0 && r.height() > 0.0 {
            ys.push(r.ly);
            ys.push(r.uy);
        }
    }
    if ys.is_empty() {
        return 0.0;
    }
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.dedup();
    if ys.len() < 2 {
        return 0.0;
    }
    let idx = |v: f64| ys.binary_search_by(|p| p.partial_cmp(&v).unwrap()).unwrap();

    // (x, delta, y-segment range [lo, hi))
    let mut events: Vec<(f64, i64, usize, usize)> = Vec::with_capacity(rects.len() * 2);
    for r in rects {
        if r.width() > 0.0 && r.height() > 0.0 {
            let lo = idx(r.ly);
            let hi = idx(r.uy);
            events.push((r.lx, 1, lo, hi));
            events.push((r.ux, -1, lo, hi));
        }
    }
    events.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });

    let mut tree = SegTree::new(&ys);
    let mut total = 0.0;
    let mut prev_x = events[0].0;
    for (x, delta, lo, hi) in events {
        let dx = x - prev_x;
        if dx > 0.0 {
            total += dx * (tree.sum2(1) - tree.sum1(1)) / 2.0;
            prev_x = x;
        }
        tree.add(1, 0, tree.segs, lo, hi, delta);
    }
    total
}

/// Segment tree over elementary y-intervals supporting range add on the
/// coverage count and root queries of sum(len * c) and sum(len * c^2).
struct SegTree {
    len: Vec<f64>,
    sum1: Vec<f64>,
    sum2: Vec<f64>,
    lazy: Vec<i64>,
    segs: usize,
}

impl SegTree {
    fn new(ys: &[f64]) -> Self {
        let segs = ys.len() - 1;
        let size = 4 * segs.max(1);
        let mut t = SegTree {
            len: vec![0.0; size],
            sum1: vec![0.0; size],
            sum2: vec![0.0; size],
            lazy: vec![0; size],
            segs,
        };
        t.build(1, 0, segs, ys);
        t
    }

    fn build(&mut self, node: usize, lo: usize, hi: usize, ys: &[f64]) {
        if hi - lo == 1 {
            self.len[node] = ys[hi] - ys[lo];
            return;
        }
        let mid = (lo + hi) / 2;
        self.build(2 * node, lo, mid, ys);
        self.build(2 * node + 1, mid, hi, ys);
        self.len[node] = self.len[2 * node] + self.len[2 * node + 1];
    }

    fn apply(&mut self, node: usize, v: i64) {
        let vf = v as f64;
        self.sum2[node] += 2.0 * vf * self.sum1[node] + vf * vf * self.len[node];
        self.sum1[node] += vf * self.len[node];
        self.lazy[node] += v;
    }

    fn push(&mut self, node: usize) {
        let v = self.lazy[node];
        if v != 0 {
            self.apply(2 * node, v);
            self.apply(2 * node + 1, v);
            self.lazy[node] = 0;
        }
    }

    fn add(&mut self, node: usize, nlo: usize, nhi: usize, lo: usize, hi: usize, v: i64) {
        if hi <= nlo || nhi <= lo {
            return;
        }
        if lo <= nlo && nhi <= hi {
            self.apply(node, v);
            return;
        }
        self.push(node);
        let mid = (nlo + nhi) / 2;
        self.add(2 * node, nlo, mid, lo, hi, v);
        self.add(2 * node + 1, mid, nhi, lo, hi, v);
        self.sum1[node] = self.sum1[2 * node] + self.sum1[2 * node + 1];
        self.sum2[node] = self.sum2[2 * node] + self.sum2[2 * node + 1];
    }

    fn sum1(&self, node: usize) -> f64 {
        self.sum1[node]
    }

    fn sum2(&self, node: usize) -> f64 {
        self.sum2[node]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(lx: f64, ly: f64, ux: f64, uy: f64) -> Rect {
        Rect::new(lx, ly, ux, uy)
    }

    #[test]
    fn pairwise_unit_overlap() {
        assert_eq!(pairwise_overlap_area(&r(0., 0., 2., 2.), &r(1., 1., 3., 3.)), 1.0);
    }

    #[test]
    fn pairwise_edge_touching_is_zero() {
        assert_eq!(pairwise_overlap_area(&r(0., 0., 1., 1.), &r(1., 1., 2., 2.)), 0.0);
        assert_eq!(pairwise_overlap_area(&r(0., 0., 1., 1.), &r(1., 0., 2., 1.)), 0.0);
    }

    #[test]
    fn pairwise_symmetric() {
        let a = r(0., 0., 4., 1.);
        let b = r(2., 0., 3., 2.);
        assert_eq!(pairwise_overlap_area(&a, &b), 1.0);
        assert_eq!(pairwise_overlap_area(&b, &a), 1.0);
    }

    #[test]
    fn total_disjoint_and_identical() {
        assert_eq!(total_overlap(&[r(0., 0., 1., 1.), r(2., 0., 3., 1.)]), 0.0);
        assert_eq!(total_overlap(&[r(0., 0., 1., 1.), r(0., 0., 1., 1.)]), 1.0);
    }

    #[test]
    fn total_three_squares() {
        // three unit squares, each consecutive pair overlapping by 0.25
        let rs = [r(0., 0., 1., 1.), r(0.75, 0.75, 1.75, 1.75), r(1.5, 1.5, 2.5, 2.5)];
        let expect = 0.25 * 0.25 * 2.0;
        assert!((total_overlap(&rs) - expect).abs() < 1e-12);
    }

    #[test]
    fn total_translation_invariant() {
        let rs = [r(0., 0., 2., 1.), r(1., 0.5, 3., 1.5), r(0.5, 0.25, 1.5, 2.)];
        let shifted: Vec<Rect> = rs
            .iter()
            .map(|q| r(q.lx + 13.25, q.ly - 7.5, q.ux + 13.25, q.uy - 7.5))
            .collect();
        assert!((total_overlap(&rs) - total_overlap(&shifted)).abs() < 1e-12);
    }

    #[test]
    fn sweep_matches_naive_random() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..20 {
            let n = 30 + trial * 7;
            let rects: Vec<Rect> = (0..n)
                .map(|_| {
                    let lx = next() * 90.0;
                    let ly = next() * 90.0;
                    let w = next() * 10.0 + 0.01;
                    let h = next() * 10.0 + 0.01;
                    r(lx, ly, lx + w, ly + h)
                })
                .collect();
            let a = total_overlap_naive(&rects);
            let b = total_overlap_sweep(&rects);
            assert!(
                (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                "naive {a} vs sweep {b}"
            );
        }
    }

    #[test]
    fn sweep_handles_shared_coordinates() {
        // stacked identical columns and touching rows
        let rects = vec![
            r(0., 0., 1., 3.),
            r(0., 0., 1., 3.),
            r(0., 3., 1., 4.),
            r(1., 0., 2., 3.),
        ];
        assert_eq!(total_overlap_sweep(&rects), 3.0);
        assert_eq!(total_overlap_naive(&rects), 3.0);
    }
}
