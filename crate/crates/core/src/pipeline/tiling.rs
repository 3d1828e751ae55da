//! Patch tiling and blending of patch predictions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::predictor::{PatchPrediction, SemanticPredictor, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::volume::Volume;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Blend {
    /// Separable Gaussian window with σ = patch/8 per axis.
    Gaussian,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TilingSpec {
    pub patch_size: [usize; 3],
    pub overlap: f64,
    pub blend: Blend,
}

impl Default for TilingSpec {
    fn default() -> Self {
        TilingSpec {
            patch_size: [256, 256, 64],
            overlap: 0.5,
            blend: Blend::Gaussian,
        }
    }
}

impl TilingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size.contains(&0) {
            return Err(Error::InvalidSpec(format!(
                "patch size must be positive, got {:?}",
                self.patch_size
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidSpec(format!(
                "overlap must be in [0, 1), got {}",
                self.overlap
            )));
        }
        Ok(())
    }

    /// Patch size after clamping to the volume.
    pub fn effective_patch(&self, dims: [usize; 3]) -> [usize; 3] {
        [0, 1, 2].map(|a| self.patch_size[a].min(dims[a]))
    }
}

/// Patch starts along one axis: multiples of the stride, with the last
/// patch moved back to end at the volume edge.
pub fn tile_axis(dim: usize, patch: usize, overlap: f64) -> Vec<usize> {
    let patch = patch.min(dim);
    if patch == dim {
        return vec![0];
    }
    let stride = ((patch as f64 * (1.0 - overlap)).floor() as usize).max(1);
    let last = dim - patch;
    let mut out: Vec<usize> = (0..).map(|k| k * stride).take_while(|&o| o < last).collect();
    out.push(last);
    out
}

/// All patch origins, axis 0 varying fastest.
pub fn tile_volume(dims: [usize; 3], spec: &TilingSpec) -> Vec<[usize; 3]> {
    let t = [0, 1, 2].map(|a| tile_axis(dims[a], spec.patch_size[a], spec.overlap));
    let mut out = Vec::with_capacity(t[0].len() * t[1].len() * t[2].len());
    for &z in &t[2] {
        for &y in &t[1] {
            for &x in &t[0] {
                out.push([x, y, z]);
            }
        }
    }
    out
}

/// Per-axis window weights of one patch.
pub fn window_weights(patch: [usize; 3], blend: Blend) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|a| {
        let n = patch[a];
        match blend {
            Blend::Uniform => vec![1.0; n],
            Blend::Gaussian => {
                let sigma = n as f64 / 8.0;
                let c = (n as f64 - 1.0) / 2.0;
                (0..n)
                    .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
                    .collect()
            }
        }
    })
}

#[derive(Clone, Debug)]
pub struct SemanticOutput {
    pub labels: Volume<u16>,
    /// Blended class scores normalized by the window weight, when requested.
    pub scores: Option<Vec<Volume<f32>>>,
    pub patches: usize,
}

fn check_prediction(p: &PatchPrediction, dims: [usize; 3], who: &str) -> Result<()> {
    let bad = |m: String| Err(Error::Predictor(format!("{who}: {m}")));
    match p {
        PatchPrediction::Labels(v) => {
            if v.dims() != dims {
                return bad(format!("label patch has dims {:?}, expected {dims:?}", v.dims()));
            }
            if let Some(x) = v.data().iter().find(|&&x| x as usize >= NUM_CLASSES) {
                return bad(format!("label patch contains code {x}"));
            }
        }
        PatchPrediction::Scores(s) => {
            if s.len() != NUM_CLASSES {
                return bad(format!("{} score volumes, expected {NUM_CLASSES}", s.len()));
            }
            if let Some(v) = s.iter().find(|v| v.dims() != dims) {
                return bad(format!("score patch has dims {:?}, expected {dims:?}", v.dims()));
            }
        }
    }
    Ok(())
}

/// Predict every patch with every predictor, then give each voxel the class
/// with the largest window-weighted sum of scores over all covering patches
/// and all predictors (a label prediction counts as a one-hot score). Ties
/// go to the smaller code.
pub fn predict_semantic(
    vol: &Volume<f32>,
    predictors: &[&dyn SemanticPredictor],
    spec: &TilingSpec,
    keep_scores: bool,
) -> Result<SemanticOutput> {
    spec.validate()?;
    if predictors.is_empty() {
        return Err(Error::EmptyInput("no semantic predictor given"));
    }
    let grid = *vol.grid();
    let dims = grid.dims;
    let patch = spec.effective_patch(dims);
    let axes = [0, 1, 2].map(|a| tile_axis(dims[a], spec.patch_size[a], spec.overlap));
    let origins = tile_volume(dims, spec);
    let jobs: Vec<(usize, [usize; 3])> = (0..predictors.len())
        .flat_map(|p| origins.iter().map(move |&o| (p, o)))
        .collect();
    let preds: Vec<PatchPrediction> = jobs
        .par_iter()
        .map(|&(p, o)| {
            let input = vol.extract(o.map(|v| v as i64), patch, 0.0);
            let out = predictors[p].predict_patch(&input, o)?;
            check_prediction(&out, patch, &predictors[p].name())?;
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let w = window_weights(patch, spec.blend);
    // For each coordinate along an axis: (tile position, offset in patch, weight).
    let covers: [Vec<Vec<(usize, usize, f64)>>; 3] = [0, 1, 2].map(|a| {
        let mut c = vec![Vec::new(); dims[a]];
        for (t, &o) in axes[a].iter().enumerate() {
            for l in 0..patch[a] {
                c[o + l].push((t, l, w[a][l]));
            }
        }
        c
    });
    let n_tiles = [axes[0].len(), axes[1].len()];
    let per_pred = origins.len();
    let slab = dims[0] * dims[1];
    let mut labels = vec![0u16; grid.len()];
    let mut scores = keep_scores.then(|| vec![vec![0f32; grid.len()]; NUM_CLASSES]);

    let fill_slab = |z: usize, out: &mut [u16], mut score_out: Option<Vec<&mut [f32]>>| {
        let mut acc = [0f64; NUM_CLASSES];
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                acc.fill(0.0);
                let mut wsum = 0.0;
                for &(tz, lz, wz) in &covers[2][z] {
                    for &(ty, ly, wy) in &covers[1][y] {
                        for &(tx, lx, wx) in &covers[0][x] {
                            let weight = wx * wy * wz;
                            let tile = tx + n_tiles[0] * (ty + n_tiles[1] * tz);
                            let local = lx + patch[0] * (ly + patch[1] * lz);
                            for p in 0..predictors.len() {
                                wsum += weight;
                                match &preds[p * per_pred + tile] {
                                    PatchPrediction::Labels(v) => acc[v.data()[local] as usize] += weight,
                                    PatchPrediction::Scores(s) => {
                                        for (k, sv) in s.iter().enumerate() {
                                            acc[k] += weight * sv.data()[local] as f64;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                let mut best = 0;
                for k in 1..NUM_CLASSES {
                    if acc[k] > acc[best] {
                        best = k;
                    }
                }
                let i = x + dims[0] * y;
                out[i] = best as u16;
                if let Some(so) = score_out.as_mut() {
                    for k in 0..NUM_CLASSES {
                        so[k][i] = (acc[k] / wsum) as f32;
                    }
                }
            }
        }
    };

    match scores.as_mut() {
        None => labels
            .par_chunks_mut(slab)
            .enumerate()
            .for_each(|(z, out)| fill_slab(z, out, None)),
        Some(sc) => {
            let mut per_class: Vec<std::slice::ChunksMut<'_, f32>> =
                sc.iter_mut().map(|v| v.chunks_mut(slab)).collect();
            let mut rows: Vec<Vec<&mut [f32]>> = (0..dims[2]).map(|_| Vec::with_capacity(NUM_CLASSES)).collect();
            for it in per_class.iter_mut() {
                for row in rows.iter_mut() {
                    row.push(it.next().expect("slab count"));
                }
            }
            labels
                .par_chunks_mut(slab)
                .zip(rows.into_par_iter())
                .enumerate()
                .for_each(|(z, (out, so))| fill_slab(z, out, Some(so)));
        }
    }

    let scores = scores
        .map(|sc| {
            sc.into_iter()
                .map(|d| Volume::with_grid(grid, d))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    Ok(SemanticOutput {
        labels: Volume::with_grid(grid, labels)?,
        scores,
        patches: origins.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    #[test]
    fn tiling_examples() {
        let spec = TilingSpec::default();
        assert_eq!(tile_volume([256, 256, 64], &spec), vec![[0, 0, 0]]);
        assert_eq!(tile_axis(384, 256, 0.5), vec![0, 128]);
        assert_eq!(tile_volume([100, 100, 10], &spec), vec![[0, 0, 0]]);
        assert_eq!(spec.effective_patch([100, 100, 10]), [100, 100, 10]);
        assert_eq!(tile_axis(10, 4, 0.5), vec![0, 2, 4, 6]);
        assert_eq!(tile_axis(11, 4, 0.0), vec![0, 4, 7]);
    }

    #[test]
    fn gaussian_window_symmetric_peak() {
        let w = window_weights([8, 5, 1], Blend::Gaussian);
        assert_eq!(w[2], vec![1.0]);
        for a in 0..2 {
            let n = w[a].len();
            for i in 0..n {
                assert!((w[a][i] - w[a][n - 1 - i]).abs() < 1e-15);
            }
        }
        assert_eq!(w[1][2], 1.0);
    }

    struct Split;

    // Class 1 in patches starting at x=0, class 2 elsewhere.
    impl SemanticPredictor for Split {
        fn name(&self) -> String {
            "split".into()
        }

        fn predict_patch(&self, patch: &Volume<f32>, origin: [usize; 3]) -> Result<PatchPrediction> {
            let mut s: Vec<Volume<f32>> = (0..NUM_CLASSES).map(|_| Volume::filled(*patch.grid(), 0.0)).collect();
            s[if origin[0] == 0 { 1 } else { 2 }] = Volume::filled(*patch.grid(), 1.0);
            Ok(PatchPrediction::Scores(s))
        }
    }

    #[test]
    fn overlap_goes_to_nearer_patch_centre() {
        let g = Grid::new([12, 1, 1], [1.0; 3]).unwrap();
        let vol = Volume::filled(g, 0.0f32);
        let spec = TilingSpec {
            patch_size: [8, 1, 1],
            overlap: 0.5,
            blend: Blend::Gaussian,
        };
        let out = predict_semantic(&vol, &[&Split], &spec, true).unwrap();
        // Patches [0,8) and [4,12) have centres 3.5 and 7.5 (σ = 1), so
        // voxels up to 5 lie nearer the first.
        assert_eq!(out.labels.data(), &[1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2]);
        let s = out.scores.unwrap();
        let (wa, wb) = ((-1.5f64 * 1.5 / 2.0).exp(), (-2.5f64 * 2.5 / 2.0).exp());
        assert!((s[1].data()[5] as f64 - wa / (wa + wb)).abs() < 1e-6);
        assert_eq!(s[1].data()[0], 1.0);
    }

    struct Constant(u16);

    impl SemanticPredictor for Constant {
        fn name(&self) -> String {
            "constant".into()
        }

        fn predict_patch(&self, patch: &Volume<f32>, _: [usize; 3]) -> Result<PatchPrediction> {
            Ok(PatchPrediction::Labels(Volume::filled(*patch.grid(), self.0)))
        }
    }

    #[test]
    fn ensemble_of_identical_equals_single() {
        let g = Grid::new([20, 9, 3], [1.0; 3]).unwrap();
        let vol = Volume::filled(g, 0.0f32);
        let spec = TilingSpec {
            patch_size: [8, 4, 2],
            ..Default::default()
        };
        let one = predict_semantic(&vol, &[&Constant(4)], &spec, false).unwrap();
        let three = predict_semantic(&vol, &[&Constant(4), &Constant(4), &Constant(4)], &spec, false).unwrap();
        assert_eq!(one.labels, three.labels);
        assert!(one.labels.data().iter().all(|&v| v == 4));
    }

    #[test]
    fn bad_label_rejected() {
        let g = Grid::new([4, 4, 4], [1.0; 3]).unwrap();
        let vol = Volume::filled(g, 0.0f32);
        let err = predict_semantic(&vol, &[&Constant(15)], &TilingSpec::default(), false).unwrap_err();
        assert!(matches!(err, Error::Predictor(_)));
    }
}
