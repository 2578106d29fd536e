use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingKind;
use crate::error::{Error, Result};
use crate::evaluation::procrustes::{procrustes_align, ProcrustesResult};
use crate::pointprocess::TrainedModel;

/// Grid of formant-space nodes spanning the vowels' bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Fractional padding added on each side of the bounding box.
    pub margin: f64,
    pub allow_reflection: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 20, ny: 20, margin: 0.1, allow_reflection: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Grid,
    Vowel,
}

/// One exported point: formant-space position (blue), metric-space image
/// (red), and the image after Procrustes alignment onto the blue points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportRow {
    pub kind: RowKind,
    pub label: String,
    pub blue: [f64; 2],
    pub red: [f64; 2],
    pub aligned: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSpaceExport {
    pub alignment: ProcrustesResult,
    pub rows: Vec<ExportRow>,
}

impl MetricSpaceExport {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kind\tlabel\tblue_x\tblue_y\tred_x\tred_y\taligned_x\taligned_y")?;
        for r in &self.rows {
            let kind = match r.kind {
                RowKind::Grid => "grid",
                RowKind::Vowel => "vowel",
            };
            writeln!(
                w,
                "{kind}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.label, r.blue[0], r.blue[1], r.red[0], r.red[1], r.aligned[0], r.aligned[1]
            )?;
        }
        Ok(())
    }
}

/// Map a formant-space grid and every vowel into the model's metric space,
/// aligning the images onto formant space by the similarity transform fitted
/// to the vowels.
pub fn export_metric_space(model: &TrainedModel, grid: &GridSpec) -> Result<MetricSpaceExport> {
    let layout = &model.params.layout;
    if layout.metric_dim() != Some(2) || layout.kind == EmbeddingKind::Tabular {
        return Err(Error::Config(format!(
            "{} has no two-dimensional metric space to export",
            model.spec.tag()
        )));
    }
    if grid.nx == 0 || grid.ny == 0 {
        return Err(Error::Config("grid needs at least one node per axis".into()));
    }
    let table = &model.table;
    let n = table.len();
    let emb = model.params.embedder();
    let image = |i: usize, f: &[f64]| -> Result<[f64; 2]> {
        let t = emb.forward(i, f)?;
        let x = t.x.unwrap_or(t.e);
        Ok([x[0], x[1]])
    };

    let mut blue_v = DMatrix::zeros(2, n);
    let mut red_v = DMatrix::zeros(2, n);
    for i in 0..n {
        let f = table.feature(i);
        let r = image(i, f)?;
        blue_v[(0, i)] = f[0];
        blue_v[(1, i)] = f[1];
        red_v[(0, i)] = r[0];
        red_v[(1, i)] = r[1];
    }
    let alignment = procrustes_align(&red_v, &blue_v, grid.allow_reflection)?;

    let (lo, hi) = (blue_v.column_iter()).fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(mut lo, mut hi), c| {
        for d in 0..2 {
            lo[d] = lo[d].min(c[d]);
            hi[d] = hi[d].max(c[d]);
        }
        (lo, hi)
    });
    let axis = |d: usize, steps: usize, t: usize| {
        let pad = grid.margin * (hi[d] - lo[d]);
        let (a, b) = (lo[d] - pad, hi[d] + pad);
        if steps == 1 {
            0.5 * (a + b)
        } else {
            a + (b - a) * t as f64 / (steps - 1) as f64
        }
    };

    let mut rows = Vec::with_capacity(grid.nx * grid.ny + n);
    let mut push = |kind, label: String, blue: [f64; 2], red: [f64; 2]| {
        let a = alignment.apply(&DMatrix::from_column_slice(2, 1, &red));
        rows.push(ExportRow { kind, label, blue, red, aligned: [a[0], a[1]] });
    };
    for gx in 0..grid.nx {
        for gy in 0..grid.ny {
            let f = [axis(0, grid.nx, gx), axis(1, grid.ny, gy)];
            push(RowKind::Grid, format!("{gx},{gy}"), f, image(0, &f)?);
        }
    }
    for i in 0..n {
        push(
            RowKind::Vowel,
            table.symbols[i].clone(),
            [blue_v[(0, i)], blue_v[(1, i)]],
            [red_v[(0, i)], red_v[(1, i)]],
        );
    }
    Ok(MetricSpaceExport { alignment, rows })
}
