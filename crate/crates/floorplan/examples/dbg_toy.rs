use floorplan::bookshelf::*;
use floorplan::field::{rasterize_density, FieldGrid};
use floorplan::global::*;
use floorplan::model::*;
use floorplan::overlap::pairwise_overlap_area;
use floorplan::wirelength::hpwl;
use floorplan::Floorplan;

fn main() {
    let dir = "benchmarks/gsrc";
    let name = std::env::args().nth(1).unwrap_or_else(|| "n100".into());
    let seed: u64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(1);
    let blocks = std::fs::read_to_string(format!("{dir}/{name}.blocks")).unwrap();
    let nets = std::fs::read_to_string(format!("{dir}/{name}.nets")).unwrap();
    let pl = std::fs::read_to_string(format!("{dir}/{name}.pl")).unwrap();
    let mut inst = load_instance(&blocks, &nets, Some(pl.as_str())).unwrap();
    soften_all(&mut inst.specs, 1.0 / 3.0, 3.0);
    let total: f64 = inst.specs.iter().map(|s| s.area).sum();
    let outline = outline_for(total, 0.10, 1.0);
    project_pads_to_boundary(&mut inst.netlist, &outline);
    let states: Vec<ModuleState> =
        inst.specs.iter().map(|s| ModuleState { x: 0.0, y: 0.0, w: s.w0 }).collect();
    let mut fp = Floorplan { outline, specs: inst.specs, states, netlist: inst.netlist };
    initial_floorplan(&mut fp, seed).unwrap();
    let mut cfg = SolverConfig { seed, ..Default::default() };
    if let Ok(s) = std::env::var("FP_OMIN") {
        cfg.o_min = s.parse().unwrap();
    }
    let res = run_global(&mut fp, &cfg).unwrap();
    println!(
        "global: hpwl={:.0} ov_pct={:.1} converged={} iters={}",
        res.hpwl, res.overlap_pct, res.converged, res.trace.len()
    );

    let n = fp.len();
    let k = 64usize;
    let rho = rasterize_density(&fp, k).unwrap();
    let mut excess: Vec<(f64, usize)> = rho
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 1.0)
        .map(|(i, &r)| (r - 1.0, i))
        .collect();
    excess.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let sum_excess: f64 = excess.iter().map(|e| e.0).sum();
    println!("bins with rho>1: {} sum_excess={:.2}", excess.len(), sum_excess);
    println!("top excess bins:");
    for (e, idx) in excess.iter().take(8) {
        let (bx, by) = (idx / k, idx % k);
        println!("  bin({bx},{by}) rho={:.3}", 1.0 + e);
    }

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = pairwise_overlap_area(&fp.rect(i), &fp.rect(j));
            if a > 1e-9 {
                pairs.push((a, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let tot: f64 = pairs.iter().map(|p| p.0).sum();
    println!("overlapping pairs: {} total_area={:.1} ({:.3}% of module area)", pairs.len(), tot, 100.0 * tot / total);
    for (a, i, j) in pairs.iter().take(12) {
        let (ri, rj) = (fp.rect(*i), fp.rect(*j));
        println!(
            "  {}+{} ov={:.1}  i: c=({:.1},{:.1}) {:.1}x{:.1}  j: c=({:.1},{:.1}) {:.1}x{:.1}",
            i, j, a,
            fp.states[*i].x, fp.states[*i].y, ri.ux - ri.lx, ri.uy - ri.ly,
            fp.states[*j].x, fp.states[*j].y, rj.ux - rj.lx, rj.uy - rj.ly
        );
    }

    let eps = 1e-6;
    let pressed = (0..n)
        .filter(|&i| {
            let r = fp.rect(i);
            r.lx < eps || r.ly < eps || r.ux > fp.outline.w - eps || r.uy > fp.outline.h - eps
        })
        .count();
    println!("modules touching boundary: {pressed}/{n}");
    println!("hpwl={:.0} final_total_overlap={:.1}", hpwl(&fp), tot);
    let _ = FieldGrid::build(&fp, k);

    use floorplan::legalize::*;
    let widths: Vec<f64> = fp.states.iter().map(|s| s.w).collect();
    let heights: Vec<f64> = (0..n).map(|i| fp.height(i)).collect();
    let (hcg, vcg) = build_constraint_graphs(&fp.rects());
    println!("hcg edges={} vcg edges={}", hcg.edge_count(), vcg.edge_count());
    let xs = pack(&hcg, &widths).unwrap();
    let ys = pack(&vcg, &heights).unwrap();
    let wd = extent(&hcg, &xs, &widths);
    let hd = extent(&vcg, &ys, &heights);
    println!("packed W_d={:.2} H_d={:.2} outline={:.2}", wd, hd, fp.outline.w);
    let mut fp2 = fp.clone();
    for i in 0..n {
        fp2.states[i].x = xs[i] + widths[i] / 2.0;
        fp2.states[i].y = ys[i] + heights[i] / 2.0;
    }
    println!(
        "hpwl after raw pack={:.0} ({:+.2}%)",
        hpwl(&fp2),
        100.0 * (hpwl(&fp2) - hpwl(&fp)) / hpwl(&fp)
    );
    let mut fp3 = fp.clone();
    let rep = legalize(&mut fp3, 10).unwrap();
    println!(
        "legalize: legal={} rounds={} hpwl_after={:.0} ({:+.2}%)",
        rep.legal,
        rep.rounds,
        rep.hpwl_after,
        100.0 * (rep.hpwl_after - rep.hpwl_before) / rep.hpwl_before
    );
}
