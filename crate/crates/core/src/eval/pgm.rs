//! Binary PGM (P5) rendering of learned receptive fields.

use crate::error::{Error, Result};
use crate::topology::SynapticMatrix;

/// One `rows x cols` tile per excitatory neuron, tiles laid out on the
/// smallest square grid that fits, separated by a one-pixel black border.
/// Weights are scaled so `w_max` maps to 255.
pub fn weight_grid_pgm(weights: &SynapticMatrix, rows: usize, cols: usize) -> Result<Vec<u8>> {
    if rows * cols != weights.n_input() {
        return Err(Error::structural(format!(
            "{rows}x{cols} tiles do not cover {} inputs",
            weights.n_input()
        )));
    }
    let n = weights.n_exc();
    let side = (1..).find(|s| s * s >= n).unwrap_or(1);
    let width = side * (cols + 1) + 1;
    let height = side * (rows + 1) + 1;
    let mut pixels = vec![0u8; width * height];
    let scale = 255.0 / weights.w_max();
    for j in 0..n {
        let (gy, gx) = (j / side, j % side);
        for i in 0..weights.n_input() {
            let (y, x) = (gy * (rows + 1) + 1 + i / cols, gx * (cols + 1) + 1 + i % cols);
            let v = (weights.get(i, j) * scale).round().clamp(0.0, 255.0);
            pixels[y * width + x] = v as u8;
        }
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}
