//! Constraint-graph legalization. Two DAGs encode left-of and below
//! relations; packing them by longest path yields an overlap-free layout.
//! When the packed extent exceeds the outline, critical edges are deleted
//! (and re-expressed in the other graph) until the layout fits.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::model::{Floorplan, Rect};
use crate::overlap::{pairwise_overlap_area, total_overlap};
use crate::wirelength::hpwl;

#[derive(Debug, Error)]
pub enum LegalizeError {
    #[error("packing exceeds the outline but no critical edge remains")]
    Structural,
    #[error("constraint graph contains a cycle")]
    Cycle,
}

#[derive(Debug, Clone)]
pub struct ConstraintGraph {
    n: usize,
    adj: Vec<Vec<usize>>,
    radj: Vec<Vec<usize>>,
    edge_set: HashSet<(usize, usize)>,
}

impl ConstraintGraph {
    pub fn new(n: usize) -> Self {
        ConstraintGraph {
            n,
            adj: vec![Vec::new(); n],
            radj: vec![Vec::new(); n],
            edge_set: HashSet::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_set.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_set.contains(&(a, b))
    }

    /// Adds a->b; returns false for self-edges and duplicates.
    pub fn add_edge(&mut self, a: usize, b: usize) -> bool {
        if a == b || !self.edge_set.insert((a, b)) {
            return false;
        }
        self.adj[a].push(b);
        self.radj[b].push(a);
        true
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) -> bool {
        if !self.edge_set.remove(&(a, b)) {
            return false;
        }
        self.adj[a].retain(|&x| x != b);
        self.radj[b].retain(|&x| x != a);
        true
    }

    /// Edges in ascending (source, insertion) order; stable for iteration.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_set.len());
        for a in 0..self.n {
            for &b in &self.adj[a] {
                out.push((a, b));
            }
        }
        out
    }

    /// True when inserting a->b would close a cycle, i.e. b already reaches a.
    pub fn would_cycle(&self, a: usize, b: usize, ops: &mut u64) -> bool {
        if a == b {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![b];
        seen[b] = true;
        while let Some(v) = stack.pop() {
            *ops += 1;
            if v == a {
                return true;
            }
            for &nx in &self.adj[v] {
                *ops += 1;
                if !seen[nx] {
                    seen[nx] = true;
                    stack.push(nx);
                }
            }
        }
        false
    }

    pub fn topo_order(&self) -> Result<Vec<usize>, LegalizeError> {
        let mut indeg: Vec<usize> = self.radj.iter().map(Vec::len).collect();
        let mut queue: Vec<usize> = (0..self.n).filter(|&v| indeg[v] == 0).collect();
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            for &nx in &self.adj[v] {
                indeg[nx] -= 1;
                if indeg[nx] == 0 {
                    queue.push(nx);
                }
            }
        }
        if queue.len() != self.n {
            return Err(LegalizeError::Cycle);
        }
        Ok(queue)
    }

    pub fn to_dot(&self, names: &[String], label: &str) -> String {
        let mut out = format!("digraph {label} {{\n");
        for a in 0..self.n {
            for &b in &self.adj[a] {
                out.push_str(&format!("  \"{}\" -> \"{}\";\n", names[a], names[b]));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the horizontal and vertical constraint graphs from rectangles.
/// Disjoint pairs get edges in both graphs; pairs overlapping in exactly one
/// axis interval get the edge that separates them; pairs overlapping in both
/// go to the graph needing the smaller push (ties to the horizontal graph).
/// Edges follow coordinate order, so both graphs are acyclic.
pub fn build_constraint_graphs(rects: &[Rect]) -> (ConstraintGraph, ConstraintGraph) {
    let n = rects.len();
    let mut hcg = ConstraintGraph::new(n);
    let mut vcg = ConstraintGraph::new(n);
    let x_order = |i: usize, j: usize| {
        let (a, b) = (&rects[i], &rects[j]);
        if (a.lx, a.ly, i) <= (b.lx, b.ly, j) {
            (i, j)
        } else {
            (j, i)
        }
    };
    let y_order = |i: usize, j: usize| {
        let (a, b) = (&rects[i], &rects[j]);
        if (a.ly, a.lx, i) <= (b.ly, b.lx, j) {
            (i, j)
        } else {
            (j, i)
        }
    };
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&rects[i], &rects[j]);
            let ov_x = a.ux.min(b.ux) - a.lx.max(b.lx);
            let ov_y = a.uy.min(b.uy) - a.ly.max(b.ly);
            match (ov_x > 0.0, ov_y > 0.0) {
                (false, false) => {
                    let (p, q) = x_order(i, j);
                    hcg.add_edge(p, q);
                    let (p, q) = y_order(i, j);
                    vcg.add_edge(p, q);
                }
                (false, true) => {
                    let (p, q) = x_order(i, j);
                    hcg.add_edge(p, q);
                }
                (true, false) => {
                    let (p, q) = y_order(i, j);
                    vcg.add_edge(p, q);
                }
                (true, true) => {
                    if ov_x > ov_y {
                        let (p, q) = y_order(i, j);
                        vcg.add_edge(p, q);
                    } else {
                        let (p, q) = x_order(i, j);
                        hcg.add_edge(p, q);
                    }
                }
            }
        }
    }
    (hcg, vcg)
}

fn longest_path(
    n: usize,
    succs: &[Vec<usize>],
    preds: &[Vec<usize>],
    dim: &[f64],
    ops: &mut u64,
) -> Result<Vec<f64>, LegalizeError> {
    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut pos = vec![0.0; n];
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        *ops += 1;
        for &nx in &succs[v] {
            *ops += 1;
            if pos[v] + dim[v] > pos[nx] {
                pos[nx] = pos[v] + dim[v];
            }
            indeg[nx] -= 1;
            if indeg[nx] == 0 {
                queue.push(nx);
            }
        }
    }
    if head != n {
        return Err(LegalizeError::Cycle);
    }
    Ok(pos)
}

/// Longest-path positions: sources at 0, every other module at the maximum
/// of predecessor position plus predecessor extent.
pub fn pack(g: &ConstraintGraph, dim: &[f64]) -> Result<Vec<f64>, LegalizeError> {
    let mut ops = 0;
    longest_path(g.n, &g.adj, &g.radj, dim, &mut ops)
}

/// Positions measured from the far side: longest path to any sink.
pub fn pack_reversed(g: &ConstraintGraph, dim: &[f64]) -> Result<Vec<f64>, LegalizeError> {
    let mut ops = 0;
    longest_path(g.n, &g.radj, &g.adj, dim, &mut ops)
}

/// Extent of the packed layout: max over sinks of position plus size.
pub fn extent(g: &ConstraintGraph, pos: &[f64], dim: &[f64]) -> f64 {
    let mut w_d = 0.0f64;
    for v in 0..g.n {
        if g.adj[v].is_empty() {
            w_d = w_d.max(pos[v] + dim[v]);
        }
    }
    w_d
}

/// Per-module slack against the target extent: limit - (pos + rev + size).
pub fn slacks(limit: f64, pos: &[f64], rev: &[f64], dim: &[f64]) -> Vec<f64> {
    pos.iter()
        .zip(rev)
        .zip(dim)
        .map(|((p, r), d)| limit - (p + r + d))
        .collect()
}

/// All edges whose endpoints both sit on a path of length at least the
/// target, i.e. have no room to move along this axis.
pub fn critical_set(g: &ConstraintGraph, slack: &[f64], tol: f64) -> Vec<(usize, usize)> {
    g.edges()
        .into_iter()
        .filter(|&(a, b)| slack[a] <= tol && slack[b] <= tol)
        .collect()
}

/// An edge is compressible when the endpoint intervals along the other axis
/// are strictly disjoint; touching intervals do not count.
pub fn compressible(a: usize, b: usize, cross_pos: &[f64], cross_dim: &[f64]) -> bool {
    cross_pos[a] + cross_dim[a] < cross_pos[b] || cross_pos[b] + cross_dim[b] < cross_pos[a]
}

/// Room left on the other axis if the pair were stacked there instead.
pub fn edge_weight(
    a: usize,
    b: usize,
    cross_pos: &[f64],
    cross_slack: &[f64],
    cross_dim: &[f64],
) -> f64 {
    if cross_pos[a] <= cross_pos[b] {
        cross_slack[a] - cross_dim[b]
    } else {
        cross_slack[b] - cross_dim[a]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LgOp {
    DeleteCompressible(usize, usize),
    Delete(usize, usize),
    Insert(usize, usize),
}

#[derive(Debug, Default, Clone, Copy)]
pub struct LgStats {
    pub iterations: usize,
    pub total_ops: u64,
    pub max_iter_ops: u64,
}

struct AxisPack {
    pos: Vec<f64>,
    rev: Vec<f64>,
    slack: Vec<f64>,
    ext: f64,
}

fn axis_pack(
    g: &ConstraintGraph,
    dim: &[f64],
    limit: f64,
    ops: &mut u64,
) -> Result<AxisPack, LegalizeError> {
    let pos = longest_path(g.n, &g.adj, &g.radj, dim, ops)?;
    let rev = longest_path(g.n, &g.radj, &g.adj, dim, ops)?;
    *ops += g.n as u64;
    let slack = slacks(limit, &pos, &rev, dim);
    Ok(AxisPack { ext: extent(g, &pos, dim), pos, rev, slack })
}

/// One-axis legalization: while the packing overflows the limit, delete one
/// critical edge per iteration, preferring compressible ones, otherwise the
/// max-weight edge whose separating duty moves to the other graph.
///
/// `hist` counts deletions per unordered pair across passes. Pairs touched
/// fewer times come first in every preference order, which stops the
/// alternation from trading the same edges back and forth between the two
/// graphs round after round.
fn lg_axis(
    main: &mut ConstraintGraph,
    cross: &mut ConstraintGraph,
    dim_main: &[f64],
    dim_cross: &[f64],
    limit_main: f64,
    limit_cross: f64,
    log: &mut Vec<LgOp>,
    hist: &mut HashMap<(usize, usize), u32>,
) -> Result<LgStats, LegalizeError> {
    let tol = 1e-9 * limit_main;
    let mut stats = LgStats::default();
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    loop {
        let mut ops = 0u64;
        let mp = axis_pack(main, dim_main, limit_main, &mut ops)?;
        if mp.ext <= limit_main {
            stats.total_ops += ops;
            stats.max_iter_ops = stats.max_iter_ops.max(ops);
            break;
        }
        let cp = axis_pack(cross, dim_cross, limit_cross, &mut ops)?;

        // modules on a longest path have the minimum slack limit - extent;
        // only their edges are critical (zero slack measured against the
        // packed extent). Transitive edges between such modules are skipped:
        // deleting an edge that is not tight cannot shorten the path.
        let crit_tol = (limit_main - mp.ext) + tol;
        let mut critical: Vec<(usize, usize)> = Vec::new();
        for (a, b) in main.edges() {
            ops += 1;
            if mp.slack[a] <= crit_tol
                && mp.slack[b] <= crit_tol
                && mp.pos[a] + dim_main[a] >= mp.pos[b] - tol
            {
                critical.push((a, b));
            }
        }
        if critical.is_empty() {
            return Err(LegalizeError::Structural);
        }
        if std::env::var("FP_LG_DEBUG").is_ok() && stats.iterations % 40 == 0 {
            eprintln!(
                "  lg iter {}: ext={:.2}/{:.2} critical={} cross_ext={:.2}/{:.2}",
                stats.iterations, mp.ext, limit_main, critical.len(), cp.ext, limit_cross
            );
        }

        let mut comp: Option<(u32, usize, usize)> = None;
        for &(a, b) in &critical {
            ops += 1;
            if compressible(a, b, &cp.pos, dim_cross) {
                let c = (*hist.get(&key(a, b)).unwrap_or(&0), a, b);
                if comp.map_or(true, |best| c < best) {
                    comp = Some(c);
                }
            }
        }

        if let Some((_, a, b)) = comp {
            main.remove_edge(a, b);
            *hist.entry(key(a, b)).or_insert(0) += 1;
            log.push(LgOp::DeleteCompressible(a, b));
            // keep the pair ordered somewhere: their cross intervals are
            // disjoint right now, so the implied cross edge holds at the
            // current coordinates and prevents the pair from drifting back
            // into overlap once later passes move the cross axis
            let (lo, hi) =
                if cp.pos[a] + dim_cross[a] <= cp.pos[b] + tol { (a, b) } else { (b, a) };
            if !cross.has_edge(lo, hi) && !cross.would_cycle(lo, hi, &mut ops) {
                cross.add_edge(lo, hi);
                log.push(LgOp::Insert(lo, hi));
            }
        } else {
            // the new cross chain runs through the inserted edge, so its
            // first-order length is pos[lo]+dim[lo]+dim[hi]+rev[hi]. Rank
            // candidates by how far that chain overflows the cross limit,
            // so flips that fit take priority; among the fitting ones keep
            // the max-weight rule, then the shorter chain, then lower ids
            let mut cands: Vec<(u32, f64, f64, usize, usize)> = critical
                .iter()
                .map(|&(a, b)| {
                    let w = edge_weight(a, b, &cp.pos, &cp.slack, dim_cross);
                    let est = if cp.pos[a] <= cp.pos[b] {
                        cp.pos[a] + dim_cross[a] + dim_cross[b] + cp.rev[b]
                    } else {
                        cp.pos[b] + dim_cross[b] + dim_cross[a] + cp.rev[a]
                    };
                    (*hist.get(&key(a, b)).unwrap_or(&0), w, est, a, b)
                })
                .collect();
            ops += cands.len() as u64;
            cands.sort_by(|x, y| {
                let xo = (x.2 - limit_cross).max(0.0);
                let yo = (y.2 - limit_cross).max(0.0);
                xo.partial_cmp(&yo)
                    .unwrap()
                    .then(x.0.cmp(&y.0))
                    .then(y.1.partial_cmp(&x.1).unwrap())
                    .then(x.2.partial_cmp(&y.2).unwrap())
                    .then((x.3, x.4).cmp(&(y.3, y.4)))
            });
            let mut done = false;
            for &(_, _, _, a, b) in &cands {
                let (lo, hi) = if cp.pos[a] <= cp.pos[b] { (a, b) } else { (b, a) };
                // a path lo => hi already orders the pair in the other
                // graph, so the edge can go without a replacement
                if cross.has_edge(lo, hi) || cross.would_cycle(hi, lo, &mut ops) {
                    main.remove_edge(a, b);
                    *hist.entry(key(a, b)).or_insert(0) += 1;
                    log.push(LgOp::Delete(a, b));
                    done = true;
                    break;
                }
                if !cross.would_cycle(lo, hi, &mut ops) {
                    main.remove_edge(a, b);
                    *hist.entry(key(a, b)).or_insert(0) += 1;
                    cross.add_edge(lo, hi);
                    log.push(LgOp::Delete(a, b));
                    log.push(LgOp::Insert(lo, hi));
                    done = true;
                    break;
                }
            }
            if !done {
                // every candidate closes a cycle, meaning the other graph
                // already orders each pair; plain deletion is safe
                let (_, _, _, a, b) = cands[0];
                main.remove_edge(a, b);
                *hist.entry(key(a, b)).or_insert(0) += 1;
                log.push(LgOp::Delete(a, b));
            }
        }
        stats.iterations += 1;
        stats.total_ops += ops;
        stats.max_iter_ops = stats.max_iter_ops.max(ops);
    }
    Ok(stats)
}

pub fn lg_x(
    hcg: &mut ConstraintGraph,
    vcg: &mut ConstraintGraph,
    widths: &[f64],
    heights: &[f64],
    w: f64,
    h: f64,
    log: &mut Vec<LgOp>,
) -> Result<LgStats, LegalizeError> {
    lg_axis(hcg, vcg, widths, heights, w, h, log, &mut HashMap::new())
}

pub fn lg_y(
    hcg: &mut ConstraintGraph,
    vcg: &mut ConstraintGraph,
    widths: &[f64],
    heights: &[f64],
    w: f64,
    h: f64,
    log: &mut Vec<LgOp>,
) -> Result<LgStats, LegalizeError> {
    lg_axis(vcg, hcg, heights, widths, h, w, log, &mut HashMap::new())
}

#[derive(Debug)]
pub struct LegalizeReport {
    pub legal: bool,
    pub rounds: usize,
    pub hpwl_before: f64,
    pub hpwl_after: f64,
    pub lg_stats: Vec<LgStats>,
}

/// Converts packed lower-left positions to module centers. Centers are what
/// the model stores, and the conversion rounds, so each center is bumped up
/// by ulps until the realized edge `center - dim/2` clears every realized
/// predecessor edge. That keeps the derived rectangles exactly disjoint.
fn install_axis(
    g: &ConstraintGraph,
    pos: &[f64],
    dim: &[f64],
    centers: &mut [f64],
) -> Result<(), LegalizeError> {
    let mut min_lo = vec![0.0f64; g.n];
    for &v in &g.topo_order()? {
        let half = dim[v] / 2.0;
        let mut c = pos[v] + half;
        while c - half < min_lo[v] {
            c = c.next_up();
        }
        centers[v] = c;
        let hi = c + half;
        for &nx in &g.adj[v] {
            if hi > min_lo[nx] {
                min_lo[nx] = hi;
            }
        }
    }
    Ok(())
}

fn install_states(
    fp: &mut Floorplan,
    hcg: &ConstraintGraph,
    vcg: &ConstraintGraph,
    xs: &[f64],
    ys: &[f64],
    widths: &[f64],
    heights: &[f64],
) -> Result<(), LegalizeError> {
    let n = fp.len();
    let mut cx = vec![0.0; n];
    let mut cy = vec![0.0; n];
    install_axis(hcg, xs, widths, &mut cx)?;
    install_axis(vcg, ys, heights, &mut cy)?;
    for i in 0..n {
        fp.states[i].x = cx[i];
        fp.states[i].y = cy[i];
    }
    Ok(())
}

struct RepairCtx {
    x_pos: Vec<f64>,
    x_rev: Vec<f64>,
    y_pos: Vec<f64>,
    y_rev: Vec<f64>,
}

/// Re-adds a separating edge for a pair that lost its only relation to a
/// compressible deletion and has come to overlap. The edge goes into the
/// graph where the new path through it stays shorter relative to the
/// outline; an insertion that would close a cycle falls back to the other
/// axis. Returns whether an edge was added.
fn repair_pair(
    i: usize,
    j: usize,
    widths: &[f64],
    heights: &[f64],
    w: f64,
    h: f64,
    ctx: &RepairCtx,
    hcg: &mut ConstraintGraph,
    vcg: &mut ConstraintGraph,
) -> bool {
    let hx = if (ctx.x_pos[i], i) <= (ctx.x_pos[j], j) { (i, j) } else { (j, i) };
    let vy = if (ctx.y_pos[i], i) <= (ctx.y_pos[j], j) { (i, j) } else { (j, i) };
    let est_x = (ctx.x_pos[hx.0] + widths[hx.0] + widths[hx.1] + ctx.x_rev[hx.1]) / w;
    let est_y = (ctx.y_pos[vy.0] + heights[vy.0] + heights[vy.1] + ctx.y_rev[vy.1]) / h;
    let mut ops = 0u64;
    let order =
        if est_x <= est_y { [(true, hx), (false, vy)] } else { [(false, vy), (true, hx)] };
    for (horizontal, (p, q)) in order {
        let g = if horizontal { &mut *hcg } else { &mut *vcg };
        if g.has_edge(p, q) || g.has_edge(q, p) {
            continue;
        }
        if !g.would_cycle(p, q, &mut ops) {
            g.add_edge(p, q);
            return true;
        }
    }
    false
}

/// Alternates horizontal and vertical legalization for up to `rounds`
/// rounds. On success the floorplan states are moved to the packed
/// lower-left coordinates (followed by a wirelength-guarded compaction);
/// on failure the best-effort packing is installed and `legal` is false.
pub fn legalize(fp: &mut Floorplan, rounds: usize) -> Result<LegalizeReport, LegalizeError> {
    let n = fp.len();
    let widths: Vec<f64> = fp.states.iter().map(|s| s.w).collect();
    let heights: Vec<f64> = (0..n).map(|i| fp.height(i)).collect();
    let (w, h) = (fp.outline.w, fp.outline.h);
    let hpwl_before = hpwl(fp);
    let (mut hcg, mut vcg) = build_constraint_graphs(&fp.rects());

    let mut report = LegalizeReport {
        legal: false,
        rounds: 0,
        hpwl_before,
        hpwl_after: hpwl_before,
        lg_stats: Vec::new(),
    };
    let mut log = Vec::new();
    let mut hist = HashMap::new();

    let dbg = std::env::var("FP_LG_DEBUG").is_ok();
    for round in 0..rounds {
        report.rounds = round + 1;
        report
            .lg_stats
            .push(lg_axis(&mut hcg, &mut vcg, &widths, &heights, w, h, &mut log, &mut hist)?);
        report
            .lg_stats
            .push(lg_axis(&mut vcg, &mut hcg, &heights, &widths, h, w, &mut log, &mut hist)?);
        if dbg {
            let xs = pack(&hcg, &widths)?;
            let ys = pack(&vcg, &heights)?;
            eprintln!(
                "round {round} post-lg: Wd={:.2} Hd={:.2} hcg={} vcg={} log={}",
                extent(&hcg, &xs, &widths),
                extent(&vcg, &ys, &heights),
                hcg.edge_count(),
                vcg.edge_count(),
                log.len()
            );
            if round >= 2 {
                eprintln!("  ops this round: {:?}", &log[log.len().saturating_sub(36)..]);
            }
        }

        // pairs whose only relation was a compressible edge may have drifted
        // back into overlap; re-separate them before judging the round (each
        // pass adds at least one edge, so this converges)
        for rep in 0..64 {
            let xs = pack(&hcg, &widths)?;
            let ys = pack(&vcg, &heights)?;
            install_states(fp, &hcg, &vcg, &xs, &ys, &widths, &heights)?;
            let rects = fp.rects();
            if total_overlap(&rects) == 0.0 {
                break;
            }
            let ctx = RepairCtx {
                x_rev: pack_reversed(&hcg, &widths)?,
                y_rev: pack_reversed(&vcg, &heights)?,
                x_pos: xs,
                y_pos: ys,
            };
            let mut added = false;
            let mut pairs = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if pairwise_overlap_area(&rects[i], &rects[j]) > 0.0 {
                        pairs += 1;
                        added |=
                            repair_pair(i, j, &widths, &heights, w, h, &ctx, &mut hcg, &mut vcg);
                    }
                }
            }
            if dbg {
                eprintln!(
                    "round {round} repair {rep}: overlapping_pairs={pairs} added={added} hcg={} vcg={}",
                    hcg.edge_count(),
                    vcg.edge_count()
                );
            }
            if !added {
                break;
            }
        }

        if dbg {
            eprintln!(
                "round {round} end: inside={} overlap={:.2} hpwl={:.0}",
                fp.inside_outline(),
                fp.total_overlap(),
                hpwl(fp)
            );
        }
        if fp.inside_outline() && fp.total_overlap() == 0.0 {
            report.legal = true;
            break;
        }
    }

    if report.legal {
        let before = hpwl(fp);
        let saved: Vec<(f64, f64)> = fp.states.iter().map(|s| (s.x, s.y)).collect();
        let (chcg, cvcg) = build_constraint_graphs(&fp.rects());
        let xs = pack(&chcg, &widths)?;
        let ys = pack(&cvcg, &heights)?;
        install_states(fp, &chcg, &cvcg, &xs, &ys, &widths, &heights)?;
        if hpwl(fp) > before || !fp.inside_outline() || fp.total_overlap() != 0.0 {
            for (st, (x, y)) in fp.states.iter_mut().zip(saved) {
                st.x = x;
                st.y = y;
            }
        }
    }
    report.hpwl_after = hpwl(fp);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModuleKind, ModuleSpec, ModuleState, Netlist, Outline};

    fn rect(lx: f64, ly: f64, w: f64, h: f64) -> Rect {
        Rect::new(lx, ly, lx + w, ly + h)
    }

    #[test]
    fn construction_cases() {
        // (a) disjoint diagonal: both graphs
        let (hcg, vcg) = build_constraint_graphs(&[rect(0.0, 0.0, 1.0, 1.0), rect(2.0, 2.0, 1.0, 1.0)]);
        assert!(hcg.has_edge(0, 1));
        assert!(vcg.has_edge(0, 1));

        // anti-diagonal: horizontal order and vertical order disagree
        let (hcg, vcg) = build_constraint_graphs(&[rect(0.0, 5.0, 1.0, 1.0), rect(3.0, 0.0, 1.0, 1.0)]);
        assert!(hcg.has_edge(0, 1));
        assert!(vcg.has_edge(1, 0));

        // (b) y-intervals overlap, x disjoint: HCG only
        let (hcg, vcg) = build_constraint_graphs(&[rect(0.0, 0.0, 1.0, 2.0), rect(2.0, 1.0, 1.0, 2.0)]);
        assert!(hcg.has_edge(0, 1));
        assert_eq!(vcg.edge_count(), 0);

        // (b') x-intervals overlap, y disjoint: VCG only
        let (hcg, vcg) = build_constraint_graphs(&[rect(0.0, 0.0, 2.0, 1.0), rect(1.0, 3.0, 2.0, 1.0)]);
        assert_eq!(hcg.edge_count(), 0);
        assert!(vcg.has_edge(0, 1));

        // (c) both overlap, wider horizontal overlap: VCG
        let (hcg, vcg) = build_constraint_graphs(&[rect(0.0, 0.0, 4.0, 2.0), rect(1.0, 1.5, 4.0, 2.0)]);
        assert_eq!(hcg.edge_count(), 0);
        assert!(vcg.has_edge(0, 1));

        // (c) tie goes to the horizontal graph
        let (hcg, vcg) = build_constraint_graphs(&[rect(0.0, 0.0, 2.0, 2.0), rect(1.0, 1.0, 2.0, 2.0)]);
        assert!(hcg.has_edge(0, 1));
        assert_eq!(vcg.edge_count(), 0);

        // touching x-intervals count as disjoint; the shared y-interval
        // makes this case (b)
        let (hcg, vcg) = build_constraint_graphs(&[rect(0.0, 0.0, 1.0, 1.0), rect(1.0, 0.0, 1.0, 1.0)]);
        assert!(hcg.has_edge(0, 1));
        assert_eq!(vcg.edge_count(), 0);

        // touching in both axes is case (a)
        let (hcg, vcg) = build_constraint_graphs(&[rect(0.0, 0.0, 1.0, 1.0), rect(1.0, 1.0, 1.0, 1.0)]);
        assert!(hcg.has_edge(0, 1));
        assert!(vcg.has_edge(0, 1));
    }

    #[test]
    fn packing_examples() {
        let mut g = ConstraintGraph::new(2);
        g.add_edge(0, 1);
        let pos = pack(&g, &[2.0, 3.0]).unwrap();
        assert_eq!(pos, vec![0.0, 2.0]);
        assert_eq!(extent(&g, &pos, &[2.0, 3.0]), 5.0);

        let mut g = ConstraintGraph::new(3);
        g.add_edge(0, 2);
        g.add_edge(1, 2);
        let pos = pack(&g, &[2.0, 5.0, 1.0]).unwrap();
        assert_eq!(pos[2], 5.0);
        assert_eq!(pos[0], 0.0);

        // parallel chains
        let mut g = ConstraintGraph::new(3);
        g.add_edge(0, 1);
        let pos = pack(&g, &[2.0, 3.0, 4.0]).unwrap();
        assert_eq!(extent(&g, &pos, &[2.0, 3.0, 4.0]), 5.0);
    }

    #[test]
    fn slack_examples() {
        let g = ConstraintGraph::new(1);
        let dim = [2.0];
        let pos = pack(&g, &dim).unwrap();
        let rev = pack_reversed(&g, &dim).unwrap();
        assert_eq!(slacks(10.0, &pos, &rev, &dim), vec![8.0]);

        let mut g = ConstraintGraph::new(2);
        g.add_edge(0, 1);
        let dim = [2.0, 3.0];
        let pos = pack(&g, &dim).unwrap();
        let rev = pack_reversed(&g, &dim).unwrap();
        assert_eq!(slacks(5.0, &pos, &rev, &dim), vec![0.0, 0.0]);
        assert_eq!(slacks(6.0, &pos, &rev, &dim), vec![1.0, 1.0]);
    }

    #[test]
    fn critical_set_uses_both_endpoints() {
        let mut g = ConstraintGraph::new(4);
        g.add_edge(0, 1);
        g.add_edge(2, 3);
        let slack = [0.0, 0.0, 0.0, 5.0];
        let crit = critical_set(&g, &slack, 1e-9);
        assert_eq!(crit, vec![(0, 1)]);
        assert!(critical_set(&g, &[1.0, 1.0, 1.0, 1.0], 1e-9).is_empty());
    }

    #[test]
    fn compressibility_examples() {
        let pos = [0.0, 2.0];
        let dim = [1.0, 1.0];
        assert!(compressible(0, 1, &pos, &dim));
        let pos = [0.0, 1.0];
        let dim = [2.0, 2.0];
        assert!(!compressible(0, 1, &pos, &dim));
        let pos = [0.0, 1.0];
        let dim = [1.0, 1.0];
        assert!(!compressible(0, 1, &pos, &dim), "touching intervals stay linked");
    }

    #[test]
    fn weight_examples() {
        // cross positions pick the branch
        let pos = [0.0, 3.0];
        assert_eq!(edge_weight(0, 1, &pos, &[5.0, 9.0], &[1.0, 2.0]), 3.0);
        let pos = [4.0, 1.0];
        assert_eq!(edge_weight(0, 1, &pos, &[9.0, 1.0], &[4.0, 2.0]), -3.0);
    }

    #[test]
    fn pack_is_monotone_under_edge_changes() {
        let dims = [2.0, 3.0, 1.5, 2.5];
        let mut g = ConstraintGraph::new(4);
        g.add_edge(0, 1);
        g.add_edge(1, 3);
        let before = pack(&g, &dims).unwrap();
        g.add_edge(2, 3);
        let after = pack(&g, &dims).unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert!(a >= b);
        }
        g.remove_edge(0, 1);
        let removed = pack(&g, &dims).unwrap();
        for (r, a) in removed.iter().zip(&after) {
            assert!(r <= a);
        }
    }

    #[test]
    fn fitting_layout_leaves_graphs_unchanged() {
        let rects = vec![rect(0.0, 0.0, 2.0, 2.0), rect(3.0, 0.0, 2.0, 2.0)];
        let (mut hcg, mut vcg) = build_constraint_graphs(&rects);
        let e_h = hcg.edges();
        let e_v = vcg.edges();
        let mut log = Vec::new();
        let stats =
            lg_x(&mut hcg, &mut vcg, &[2.0, 2.0], &[2.0, 2.0], 10.0, 10.0, &mut log).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(log.is_empty());
        assert_eq!(hcg.edges(), e_h);
        assert_eq!(vcg.edges(), e_v);
    }

    /// Seven modules shaped so that horizontal legalization must drop the
    /// two widest-spanning chain edges and express them vertically.
    fn walkthrough() -> (Vec<Rect>, Vec<f64>, Vec<f64>) {
        let rects = vec![
            rect(0.0, 0.0, 6.0, 4.5),  // m1
            rect(6.5, 3.0, 5.0, 2.5),  // m2
            rect(6.2, 0.2, 5.0, 3.5),  // m3
            rect(0.3, 9.1, 1.5, 1.3),  // m4
            rect(2.2, 9.2, 1.5, 1.3),  // m5
            rect(0.4, 10.8, 1.5, 1.2), // m6
            rect(2.3, 10.9, 1.5, 1.2), // m7
        ];
        let widths = rects.iter().map(Rect::width).collect();
        let heights = rects.iter().map(Rect::height).collect();
        (rects, widths, heights)
    }

    #[test]
    fn walkthrough_deletes_two_chain_edges_into_the_vertical_graph() {
        let (rects, widths, heights) = walkthrough();
        let (mut hcg, mut vcg) = build_constraint_graphs(&rects);
        assert!(hcg.has_edge(0, 1) && hcg.has_edge(0, 2));
        let mut log = Vec::new();
        lg_x(&mut hcg, &mut vcg, &widths, &heights, 10.0, 12.0, &mut log).unwrap();
        assert_eq!(
            log,
            vec![
                LgOp::Delete(0, 1),
                LgOp::Insert(0, 1),
                LgOp::Delete(0, 2),
                LgOp::Insert(0, 2)
            ]
        );
        let xs = pack(&hcg, &widths).unwrap();
        assert!(extent(&hcg, &xs, &widths) <= 10.0);
        assert!(vcg.has_edge(0, 1) && vcg.has_edge(0, 2));
    }

    fn plan_from_rects(outline: Outline, rects: &[Rect]) -> Floorplan {
        let specs = rects
            .iter()
            .enumerate()
            .map(|(i, r)| ModuleSpec {
                id: i,
                name: format!("m{i}"),
                kind: ModuleKind::Hard,
                area: r.area(),
                w0: r.width(),
                h0: r.height(),
            })
            .collect();
        let states = rects
            .iter()
            .map(|r| ModuleState {
                x: (r.lx + r.ux) / 2.0,
                y: (r.ly + r.uy) / 2.0,
                w: r.width(),
            })
            .collect();
        Floorplan { outline, specs, states, netlist: Netlist::default() }
    }

    #[test]
    fn legal_input_comes_back_compacted_and_legal() {
        let fp0 = plan_from_rects(
            Outline::new(10.0, 10.0),
            &[rect(1.0, 1.0, 2.0, 2.0), rect(5.0, 4.0, 3.0, 2.0)],
        );
        let mut fp = fp0.clone();
        let report = legalize(&mut fp, 10).unwrap();
        assert!(report.legal);
        assert_eq!(report.rounds, 1);
        assert_eq!(fp.total_overlap(), 0.0);
        assert!(fp.inside_outline());
    }

    fn xorshift(state: &mut u64) -> f64 {
        *state ^= *state << 13;
        *state ^= *state >> 7;
        *state ^= *state << 17;
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Random guillotine slicing of the outline, each cell shrunk to the
    /// target utilization, jittered, and occasionally inflated so the packed
    /// layout overflows a little. Mimics the near-legal layouts a global
    /// pass hands to the legalizer.
    fn jittered_instance(seed: &mut u64, n: usize, side: f64, util: f64) -> Vec<Rect> {
        let mut cells = vec![Rect::new(0.0, 0.0, side, side)];
        let mut counts = vec![n];
        let mut rects = Vec::new();
        while let (Some(cell), Some(k)) = (cells.pop(), counts.pop()) {
            if k == 1 {
                let s = util.sqrt();
                let (w, h) = (cell.width() * s, cell.height() * s);
                let amp = 0.55 * w.min(h);
                let jx = (xorshift(seed) - 0.5) * amp;
                let jy = (xorshift(seed) - 0.5) * amp;
                let lx = cell.lx + (cell.width() - w) / 2.0 + jx;
                let ly = cell.ly + (cell.height() - h) / 2.0 + jy;
                rects.push(rect(lx, ly, w, h));
                continue;
            }
            let k1 = 1 + (xorshift(seed) * (k - 1) as f64) as usize;
            let frac = (k1 as f64 / k as f64).clamp(0.2, 0.8);
            let (a, b) = if cell.width() >= cell.height() {
                let cut = cell.lx + frac * cell.width();
                (
                    Rect::new(cell.lx, cell.ly, cut, cell.uy),
                    Rect::new(cut, cell.ly, cell.ux, cell.uy),
                )
            } else {
                let cut = cell.ly + frac * cell.height();
                (
                    Rect::new(cell.lx, cell.ly, cell.ux, cut),
                    Rect::new(cell.lx, cut, cell.ux, cell.uy),
                )
            };
            cells.push(a);
            counts.push(k1);
            cells.push(b);
            counts.push(k - k1);
        }
        rects
    }

    #[test]
    fn random_overlapping_instances_become_legal() {
        let mut seed = 0x9e3779b97f4a7c15;
        let mut engaged = false;
        for trial in 0..10u64 {
            seed ^= trial.wrapping_mul(0x2545f4914f6cdd1d);
            let side = 20.0;
            let rects = jittered_instance(&mut seed, 30, side, 0.85);
            assert!(total_overlap(&rects) > 0.0, "trial {trial} generated no overlap");
            let mut fp = plan_from_rects(Outline::new(side, side), &rects);
            let report = legalize(&mut fp, 10).unwrap();
            assert!(report.legal, "trial {trial} failed");
            assert_eq!(fp.total_overlap(), 0.0, "trial {trial} overlaps");
            assert!(fp.inside_outline(), "trial {trial} outside");
            engaged |= report.lg_stats.iter().any(|s| s.iterations > 0);
        }
        assert!(engaged, "no trial needed edge deletions");
    }

    #[test]
    fn legalize_is_deterministic() {
        let rects = vec![
            rect(0.0, 0.0, 3.0, 3.0),
            rect(1.0, 1.0, 3.0, 3.0),
            rect(2.0, 0.5, 2.0, 4.0),
            rect(0.5, 2.5, 4.0, 2.0),
        ];
        let run = || {
            let mut fp = plan_from_rects(Outline::new(9.0, 9.0), &rects);
            legalize(&mut fp, 10).unwrap();
            fp.states.iter().map(|s| (s.x, s.y)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn structural_error_when_a_module_cannot_fit() {
        // single module wider than the outline: no edge to delete
        let rects = vec![rect(0.0, 0.0, 12.0, 1.0), rect(0.0, 5.0, 12.0, 1.0)];
        let (mut hcg, mut vcg) = build_constraint_graphs(&rects);
        let widths = [12.0, 12.0];
        let heights = [1.0, 1.0];
        let mut log = Vec::new();
        let r = lg_x(&mut hcg, &mut vcg, &widths, &heights, 10.0, 10.0, &mut log);
        assert!(matches!(r, Err(LegalizeError::Structural)));
    }

    #[test]
    fn dot_export_lists_edges() {
        let mut g = ConstraintGraph::new(2);
        g.add_edge(0, 1);
        let names = vec!["a".to_string(), "b".to_string()];
        let dot = g.to_dot(&names, "hcg");
        assert!(dot.contains("\"a\" -> \"b\""));
    }
}
