//! Shared domain types: outline, modules, nets, and whole-floorplan state.

use crate::overlap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub lx: f64,
    pub ly: f64,
    pub ux: f64,
    pub uy: f64,
}

impl Rect {
    pub fn new(lx: f64, ly: f64, ux: f64, uy: f64) -> Self {
        Rect { lx, ly, ux, uy }
    }

    pub fn width(&self) -> f64 {
        self.ux - self.lx
    }

    pub fn height(&self) -> f64 {
        self.uy - self.ly
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// The fixed floorplanning region [0, w] x [0, h].
#[derive(Debug, Clone, Copy)]
pub struct Outline {
    pub w: f64,
    pub h: f64,
}

impl Outline {
    pub fn new(w: f64, h: f64) -> Self {
        assert!(w > 0.0 && h > 0.0, "outline sides must be positive");
        Outline { w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Sizes the floorplanning region from the total module area, a whitespace
/// fraction, and the region aspect ratio gamma = H/W.
pub fn outline_for(total_area: f64, whitespace: f64, gamma: f64) -> Outline {
    assert!(whitespace >= 0.0, "whitespace must be nonnegative");
    assert!(gamma > 0.0, "aspect ratio must be positive");
    let chip = total_area * (1.0 + whitespace);
    let h = (chip * gamma).sqrt();
    Outline::new(h / gamma, h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModuleKind {
    Hard,
    /// Fixed area, free shape within aspect-ratio (height/width) bounds.
    Soft { ar_lo: f64, ar_hi: f64 },
}

#[derive(Debug, Clone)]
pub struct ModuleSpec {
    pub id: usize,
    pub name: String,
    pub kind: ModuleKind,
    pub area: f64,
    /// Shape from the input: fixed for hard modules, a starting point for soft ones.
    pub w0: f64,
    pub h0: f64,
}

impl ModuleSpec {
    pub fn is_soft(&self) -> bool {
        matches!(self.kind, ModuleKind::Soft { .. })
    }
}

/// Mutable placement state of one module: center position and width.
/// The height is always derived as area / w.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleState {
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

pub fn occupied_rect(spec: &ModuleSpec, st: &ModuleState) -> Rect {
    debug_assert!(st.w > 0.0);
    let h = spec.area / st.w;
    Rect::new(
        st.x - st.w / 2.0,
        st.y - h / 2.0,
        st.x + st.w / 2.0,
        st.y + h / 2.0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinRef {
    Block(usize),
    Pad(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct Pin {
    pub target: PinRef,
    /// Offset from the module center as a fraction of its width/height, so the
    /// pin tracks soft-module reshaping. Zero (and unused) for pads.
    pub fx: f64,
    pub fy: f64,
}

#[derive(Debug, Clone)]
pub struct Net {
    pub pins: Vec<Pin>,
}

/// An I/O pad with a fixed absolute position.
#[derive(Debug, Clone)]
pub struct Terminal {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Netlist {
    pub nets: Vec<Net>,
    pub pads: Vec<Terminal>,
}

#[derive(Debug, Clone)]
pub struct Floorplan {
    pub outline: Outline,
    pub specs: Vec<ModuleSpec>,
    pub states: Vec<ModuleState>,
    pub netlist: Netlist,
}

impl Floorplan {
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn height(&self, i: usize) -> f64 {
        self.specs[i].area / self.states[i].w
    }

    pub fn rect(&self, i: usize) -> Rect {
        occupied_rect(&self.specs[i], &self.states[i])
    }

    pub fn rects(&self) -> Vec<Rect> {
        (0..self.len()).map(|i| self.rect(i)).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.specs.iter().map(|s| s.area).sum()
    }

    pub fn pin_position(&self, pin: &Pin) -> (f64, f64) {
        match pin.target {
            PinRef::Block(i) => {
                let st = &self.states[i];
                (st.x + pin.fx * st.w, st.y + pin.fy * self.height(i))
            }
            PinRef::Pad(t) => {
                let p = &self.netlist.pads[t];
                (p.x, p.y)
            }
        }
    }

    pub fn total_overlap(&self) -> f64 {
        overlap::total_overlap(&self.rects())
    }

    /// True when no module sticks out of the outline (exact comparison).
    pub fn inside_outline(&self) -> bool {
        self.rects().iter().all(|r| {
            r.lx >= 0.0 && r.ly >= 0.0 && r.ux <= self.outline.w && r.uy <= self.outline.h
        })
    }
}
