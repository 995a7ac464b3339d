use std::ops::Range;

use super::{CellKind, NetConfig};

/// A named, row-major slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub range: Range<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct CellSlots {
    pub w_ih: Range<usize>,
    pub w_hh: Range<usize>,
    pub b_ih: Range<usize>,
    pub b_hh: Option<Range<usize>>,
    pub input: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub kind: CellKind,
    pub hidden: usize,
    pub z_w: Range<usize>,
    pub z_b: Range<usize>,
    pub cells: Vec<[CellSlots; 2]>,
    pub out_w: Range<usize>,
    pub out_b: Range<usize>,
    pub tensors: Vec<TensorSpec>,
    pub total: usize,
}

impl Layout {
    pub fn gates(&self) -> usize {
        match self.kind {
            CellKind::BiLstm => 4,
            CellKind::BiGru => 3,
        }
    }

    pub fn new(cfg: &NetConfig) -> Self {
        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, dims: Vec<usize>| {
            let n: usize = dims.iter().product();
            let range = offset..offset + n;
            offset += n;
            tensors.push(TensorSpec { name, dims, range: range.clone() });
            range
        };
        let h = cfg.hidden_size;
        let e = cfg.z_embed_dim;
        let gates = match cfg.cell {
            CellKind::BiLstm => 4,
            CellKind::BiGru => 3,
        };
        let z_w = push("z_embed.weight".into(), vec![e, 1]);
        let z_b = push("z_embed.bias".into(), vec![e]);
        let mut cells = Vec::with_capacity(cfg.n_layers);
        for l in 0..cfg.n_layers {
            let input = if l == 0 { 4 + e } else { 2 * h };
            let mut dir = |tag: &str| {
                let w_ih = push(format!("cell.{l}.{tag}.w_ih"), vec![gates * h, input]);
                let w_hh = push(format!("cell.{l}.{tag}.w_hh"), vec![gates * h, h]);
                let b_ih = push(format!("cell.{l}.{tag}.b_ih"), vec![gates * h]);
                let b_hh = match cfg.cell {
                    CellKind::BiGru => Some(push(format!("cell.{l}.{tag}.b_hh"), vec![gates * h])),
                    CellKind::BiLstm => None,
                };
                CellSlots { w_ih, w_hh, b_ih, b_hh, input }
            };
            let fwd = dir("fwd");
            let bwd = dir("bwd");
            cells.push([fwd, bwd]);
        }
        let out_w = push("out.weight".into(), vec![4, 2 * h]);
        let out_b = push("out.bias".into(), vec![4]);
        Self { kind: cfg.cell, hidden: h, z_w, z_b, cells, out_w, out_b, tensors, total: offset }
    }
}
