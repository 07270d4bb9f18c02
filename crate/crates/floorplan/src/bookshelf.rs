//! Parsing of GSRC bookshelf-dialect .blocks/.nets/.pl files and writing of
//! placement results.
//!
//! The .pl writer emits one `name llx lly width height` line per module so a
//! result can be re-read (and checked) with the same parser.

use std::collections::HashMap;

use thiserror::Error;

use crate::model::{
    ModuleKind, ModuleSpec, Net, Netlist, Outline, Pin, PinRef, Terminal,
};

#[derive(Debug, Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, msg: msg.into() })
}

fn is_banner(line: &str) -> bool {
    let l = line.to_ascii_lowercase();
    l.contains("1.0") && (l.contains("blocks") || l.contains("nets") || l.contains("pl"))
}

/// Significant lines of a file with their 1-based numbers; comments (`#`) and
/// blank lines and the version banner are skipped.
fn significant_lines(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut banner_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !banner_seen && is_banner(line) {
            banner_seen = true;
            continue;
        }
        out.push((i + 1, line));
    }
    out
}

/// Parses `Key : value` headers; returns None when the line is not a header.
fn header(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once(':')?;
    let k = k.trim();
    if k.chars().all(|c| c.is_ascii_alphanumeric()) && !k.is_empty() {
        Some((k, v.trim()))
    } else {
        None
    }
}

#[derive(Debug)]
pub struct ParsedBlocks {
    pub specs: Vec<ModuleSpec>,
    pub terminal_names: Vec<String>,
}

pub fn parse_blocks(text: &str) -> Result<ParsedBlocks, ParseError> {
    let mut num_soft = None;
    let mut num_hard = None;
    let mut num_term = None;
    let mut specs: Vec<ModuleSpec> = Vec::new();
    let mut terminal_names = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (ln, line) in significant_lines(text) {
        if let Some((key, value)) = header(line) {
            let n: usize = match value.parse() {
                Ok(n) => n,
                Err(_) => return err(ln, format!("bad count in header {key}")),
            };
            match key {
                "NumSoftRectangularBlocks" => num_soft = Some(n),
                "NumHardRectilinearBlocks" => num_hard = Some(n),
                "NumTerminals" => num_term = Some(n),
                _ => return err(ln, format!("unknown header {key}")),
            }
            continue;
        }
        if num_soft.is_none() || num_hard.is_none() || num_term.is_none() {
            return err(ln, "block record before count headers");
        }

        let mut toks = line.split_whitespace();
        let name = toks.next().unwrap().to_string();
        if seen.insert(name.clone(), ln).is_some() {
            return err(ln, format!("duplicate name {name}"));
        }
        let kind = toks.next().unwrap_or("");
        match kind {
            "softrectangular" => {
                let nums: Vec<f64> = toks.filter_map(|t| t.parse().ok()).collect();
                if nums.len() != 3 {
                    return err(ln, "softrectangular needs area and two aspect bounds");
                }
                let (area, ar_lo, ar_hi) = (nums[0], nums[1], nums[2]);
                if area <= 0.0 || ar_lo <= 0.0 || ar_lo > ar_hi {
                    return err(ln, "bad soft block parameters");
                }
                let w0 = area.sqrt();
                specs.push(ModuleSpec {
                    id: specs.len(),
                    name,
                    kind: ModuleKind::Soft { ar_lo, ar_hi },
                    area,
                    w0,
                    h0: w0,
                });
            }
            "hardrectilinear" => {
                let rest: String = toks.collect::<Vec<_>>().join(" ");
                let cleaned = rest.replace(['(', ')', ','], " ");
                let nums: Vec<f64> =
                    cleaned.split_whitespace().filter_map(|t| t.parse().ok()).collect();
                if nums.is_empty() || nums[0] as usize != 4 || nums.len() != 1 + 8 {
                    return err(ln, "hardrectilinear needs exactly 4 vertices");
                }
                let mut xs: Vec<f64> = nums[1..].iter().step_by(2).copied().collect();
                let mut ys: Vec<f64> = nums[2..].iter().step_by(2).copied().collect();
                let corners: Vec<(f64, f64)> =
                    xs.iter().zip(&ys).map(|(&x, &y)| (x, y)).collect();
                xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                xs.dedup();
                ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
                ys.dedup();
                if xs.len() != 2 || ys.len() != 2 {
                    return err(ln, "hard block vertices are not an axis-aligned rectangle");
                }
                for cx in &xs {
                    for cy in &ys {
                        if !corners.contains(&(*cx, *cy)) {
                            return err(ln, "hard block vertices are not an axis-aligned rectangle");
                        }
                    }
                }
                let (w, h) = (xs[1] - xs[0], ys[1] - ys[0]);
                if w <= 0.0 || h <= 0.0 {
                    return err(ln, "hard block has empty extent");
                }
                specs.push(ModuleSpec {
                    id: specs.len(),
                    name,
                    kind: ModuleKind::Hard,
                    area: w * h,
                    w0: w,
                    h0: h,
                });
            }
            "terminal" => terminal_names.push(name),
            _ => return err(ln, format!("unknown block kind {kind}")),
        }
    }

    let soft = specs.iter().filter(|s| s.is_soft()).count();
    let hard = specs.len() - soft;
    if Some(soft) != num_soft {
        return err(0, format!("expected {:?} soft blocks, found {soft}", num_soft));
    }
    if Some(hard) != num_hard {
        return err(0, format!("expected {:?} hard blocks, found {hard}", num_hard));
    }
    if Some(terminal_names.len()) != num_term {
        return err(
            0,
            format!("expected {:?} terminals, found {}", num_term, terminal_names.len()),
        );
    }
    Ok(ParsedBlocks { specs, terminal_names })
}

/// Converts every hard module to a soft one with the given aspect bounds,
/// keeping its area. Used to run hard-block benchmarks in soft mode.
pub fn soften_all(specs: &mut [ModuleSpec], ar_lo: f64, ar_hi: f64) {
    for s in specs.iter_mut() {
        s.kind = ModuleKind::Soft { ar_lo, ar_hi };
    }
}

pub fn parse_nets(
    text: &str,
    names: &HashMap<String, PinRef>,
) -> Result<Vec<Net>, ParseError> {
    let mut num_nets = None;
    let mut num_pins = None;
    let mut nets: Vec<Net> = Vec::new();
    let mut pending: Option<(usize, usize)> = None; // (declared degree, decl line)
    let mut pin_count = 0usize;

    for (ln, line) in significant_lines(text) {
        if let Some((key, value)) = header(line) {
            match key {
                "NumNets" => {
                    num_nets = Some(value.parse::<usize>().map_err(|_| ParseError {
                        line: ln,
                        msg: "bad NumNets".into(),
                    })?);
                    continue;
                }
                "NumPins" => {
                    num_pins = Some(value.parse::<usize>().map_err(|_| ParseError {
                        line: ln,
                        msg: "bad NumPins".into(),
                    })?);
                    continue;
                }
                "NetDegree" => {
                    if let Some((want, decl)) = pending {
                        let got = nets.last().map_or(0, |n| n.pins.len());
                        if got != want {
                            return err(decl, format!("net declares {want} pins, found {got}"));
                        }
                    }
                    let d: usize = value.split_whitespace().next().unwrap_or("").parse().map_err(
                        |_| ParseError { line: ln, msg: "bad NetDegree".into() },
                    )?;
                    nets.push(Net { pins: Vec::with_capacity(d) });
                    pending = Some((d, ln));
                    continue;
                }
                _ => {} // fall through: a pin line can contain ':' offsets
            }
        }
        let Some((want, _)) = pending else {
            return err(ln, "pin record before NetDegree");
        };
        let net = nets.last_mut().unwrap();
        if net.pins.len() >= want {
            return err(ln, format!("net declares {want} pins, found more"));
        }

        let mut toks = line.split_whitespace().peekable();
        let name = toks.next().unwrap();
        let target = match names.get(name) {
            Some(&t) => t,
            None => return err(ln, format!("unknown module or terminal {name}")),
        };
        // optional direction token, then optional ": %x %y" offsets
        let mut fx = 0.0;
        let mut fy = 0.0;
        let rest: Vec<&str> = toks.collect();
        let mut i = 0;
        if i < rest.len() && rest[i] != ":" && !rest[i].starts_with('%') {
            i += 1; // direction marker such as B
        }
        if i < rest.len() && rest[i] == ":" {
            i += 1;
        }
        if i < rest.len() {
            let offs: Vec<&str> = rest[i..].to_vec();
            if offs.len() != 2 || !offs[0].starts_with('%') || !offs[1].starts_with('%') {
                return err(ln, "pin offsets must be two %-numbers");
            }
            let px: f64 = offs[0][1..]
                .parse()
                .map_err(|_| ParseError { line: ln, msg: "bad pin offset".into() })?;
            let py: f64 = offs[1][1..]
                .parse()
                .map_err(|_| ParseError { line: ln, msg: "bad pin offset".into() })?;
            fx = px / 100.0;
            fy = py / 100.0;
        }
        net.pins.push(Pin { target, fx, fy });
        pin_count += 1;
    }

    if let Some((want, decl)) = pending {
        let got = nets.last().map_or(0, |n| n.pins.len());
        if got != want {
            return err(decl, format!("net declares {want} pins, found {got}"));
        }
    }
    if let Some(n) = num_nets {
        if nets.len() != n {
            return err(0, format!("expected {n} nets, found {}", nets.len()));
        }
    }
    if let Some(p) = num_pins {
        if pin_count != p {
            return err(0, format!("expected {p} pins, found {pin_count}"));
        }
    }
    Ok(nets)
}

#[derive(Debug, Clone)]
pub struct PlEntry {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub dims: Option<(f64, f64)>,
}

pub fn parse_pl(text: &str) -> Result<Vec<PlEntry>, ParseError> {
    let mut out = Vec::new();
    for (ln, line) in significant_lines(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 && toks.len() != 5 {
            return err(ln, "placement line needs `name x y` or `name x y w h`");
        }
        let nums: Vec<f64> = toks[1..].iter().filter_map(|t| t.parse().ok()).collect();
        if nums.len() != toks.len() - 1 {
            return err(ln, "bad coordinate");
        }
        out.push(PlEntry {
            name: toks[0].to_string(),
            x: nums[0],
            y: nums[1],
            dims: if nums.len() == 4 { Some((nums[2], nums[3])) } else { None },
        });
    }
    Ok(out)
}

/// One line per module: name, lower-left corner, width, height, ordered by id.
pub fn write_pl(fp: &crate::model::Floorplan) -> String {
    let mut out = String::from("# placement: name llx lly width height\n");
    for i in 0..fp.len() {
        let r = fp.rect(i);
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            fp.specs[i].name,
            r.lx,
            r.ly,
            r.width(),
            r.height()
        ));
    }
    out
}

#[derive(Debug)]
pub struct Instance {
    pub specs: Vec<ModuleSpec>,
    pub netlist: Netlist,
    /// Lower-left block positions from the input .pl, when present.
    pub block_positions: Vec<Option<(f64, f64)>>,
}

/// Assembles a full instance from the three bookshelf files. Terminal
/// positions come from the .pl file; terminals referenced by nets must have
/// one.
pub fn load_instance(
    blocks_text: &str,
    nets_text: &str,
    pl_text: Option<&str>,
) -> Result<Instance, ParseError> {
    let blocks = parse_blocks(blocks_text)?;
    let mut names: HashMap<String, PinRef> = HashMap::new();
    for s in &blocks.specs {
        names.insert(s.name.clone(), PinRef::Block(s.id));
    }
    let mut pads: Vec<Terminal> = Vec::with_capacity(blocks.terminal_names.len());
    for (i, t) in blocks.terminal_names.iter().enumerate() {
        if names.insert(t.clone(), PinRef::Pad(i)).is_some() {
            return err(0, format!("terminal {t} duplicates a block name"));
        }
        pads.push(Terminal { name: t.clone(), x: 0.0, y: 0.0 });
    }

    let mut block_positions = vec![None; blocks.specs.len()];
    let mut pad_placed = vec![false; pads.len()];
    if let Some(pl) = pl_text {
        for e in parse_pl(pl)? {
            match names.get(&e.name) {
                Some(&PinRef::Block(i)) => block_positions[i] = Some((e.x, e.y)),
                Some(&PinRef::Pad(i)) => {
                    pads[i].x = e.x;
                    pads[i].y = e.y;
                    pad_placed[i] = true;
                }
                None => return err(0, format!("placement for unknown name {}", e.name)),
            }
        }
    }

    let nets = parse_nets(nets_text, &names)?;
    for net in &nets {
        for pin in &net.pins {
            if let PinRef::Pad(i) = pin.target {
                if !pad_placed[i] {
                    return err(0, format!("terminal {} has no placement", pads[i].name));
                }
            }
        }
    }

    Ok(Instance {
        specs: blocks.specs,
        netlist: Netlist { nets, pads },
        block_positions,
    })
}

/// Moves every pad to the nearest point on the outline boundary.
pub fn project_pads_to_boundary(netlist: &mut Netlist, outline: &Outline) {
    for p in &mut netlist.pads {
        let x = p.x.clamp(0.0, outline.w);
        let y = p.y.clamp(0.0, outline.h);
        if x > 0.0 && x < outline.w && y > 0.0 && y < outline.h {
            let dists = [x, outline.w - x, y, outline.h - y];
            let mut best = 0;
            for (i, d) in dists.iter().enumerate() {
                if *d < dists[best] {
                    best = i;
                }
            }
            match best {
                0 => p.x = 0.0,
                1 => p.x = outline.w,
                2 => p.y = 0.0,
                _ => p.y = outline.h,
            }
            if best < 2 {
                p.y = y;
            } else {
                p.x = x;
            }
        } else {
            p.x = x;
            p.y = y;
        }
    }
}
