use std::time::Instant;

use spinekit::assembly::{AssemblyConfig, GroupingRule};
use spinekit::phantom::{generate_phantom, NoiseSpec, OracleInstancePredictor, OracleSemanticPredictor, PhantomSpec};
use spinekit::pipeline::{run_pipeline, to_working, Blend, PipelineConfig, TilingSpec};
use spinekit::volume::{reorient, Orientation};

fn small(n: u32, seed: u64) -> PhantomSpec {
    PhantomSpec {
        n_vertebrae: n,
        dims: [128, 192, 32],
        spacing: [1.5, 1.5, 3.3],
        seed,
        ..PhantomSpec::default()
    }
}

fn coarse_config(spacing: [f64; 3]) -> PipelineConfig {
    PipelineConfig {
        target_spacing: Some(spacing),
        tiling: TilingSpec {
            patch_size: [128, 128, 32],
            overlap: 0.5,
            blend: Blend::Gaussian,
        },
        assembly: AssemblyConfig {
            cutout_size: [124, 152, 32],
            ..AssemblyConfig::default()
        },
        threads: Some(1),
        postprocess: true,
    }
}

#[test]
fn zero_noise_oracles_reproduce_ground_truth() {
    for (seed, fuse) in [(1u64, None), (2, Some((2u32, 3u32))), (3, Some((4, 5)))] {
        let spec = PhantomSpec {
            fuse_pairs: fuse.into_iter().collect(),
            ..small(6, seed)
        };
        let p = generate_phantom(&spec).unwrap();
        let sem = OracleSemanticPredictor {
            gt: p.semantic.clone(),
            noise: NoiseSpec::none(),
        };
        let inst = OracleInstancePredictor::new(p.instance.clone(), NoiseSpec::none());
        let out = run_pipeline(&p.intensity, &[&sem], &inst, &coarse_config(spec.spacing)).unwrap();
        assert_eq!(out.semantic.data(), p.semantic.data(), "seed {seed}");
        assert_eq!(out.instance.data(), p.instance.data(), "seed {seed}");
        assert!(out.report.consistency.unwrap().is_clean());
        assert!(out.report.warnings.is_empty(), "{:?}", out.report.warnings);
    }
}

#[test]
fn index_grouping_fails_on_fused_pair() {
    let spec = PhantomSpec {
        fuse_pairs: vec![(3, 4)],
        ..small(6, 9)
    };
    let p = generate_phantom(&spec).unwrap();
    let sem = OracleSemanticPredictor {
        gt: p.semantic.clone(),
        noise: NoiseSpec::none(),
    };
    let inst = OracleInstancePredictor::new(p.instance.clone(), NoiseSpec::none());
    let mut cfg = coarse_config(spec.spacing);
    let spatial = run_pipeline(&p.intensity, &[&sem], &inst, &cfg).unwrap();
    assert_eq!(spatial.instance.data(), p.instance.data());
    cfg.assembly.grouping = GroupingRule::Index;
    let index = run_pipeline(&p.intensity, &[&sem], &inst, &cfg).unwrap();
    assert_ne!(index.instance.data(), p.instance.data());
}

#[test]
fn reoriented_input_maps_back() {
    let spec = small(5, 4);
    let p = generate_phantom(&spec).unwrap();
    let ras: Orientation = "RAS".parse().unwrap();
    let vol = reorient(&p.intensity, ras);
    let gt_sem = reorient(&p.semantic, ras);
    let gt_inst = reorient(&p.instance, ras);
    let sem = OracleSemanticPredictor {
        gt: to_working(&gt_sem, Some(spec.spacing)).unwrap(),
        noise: NoiseSpec::none(),
    };
    let inst = OracleInstancePredictor::new(to_working(&gt_inst, Some(spec.spacing)).unwrap(), NoiseSpec::none());
    let out = run_pipeline(&vol, &[&sem], &inst, &coarse_config(spec.spacing)).unwrap();
    assert_eq!(out.semantic.grid(), vol.grid());
    assert_eq!(out.semantic.data(), gt_sem.data());
    assert_eq!(out.instance.data(), gt_inst.data());
}

#[test]
fn noisy_oracles_keep_vertebra_count() {
    let mut ok = 0;
    for seed in 0..6u64 {
        let spec = small(6, 100 + seed);
        let p = generate_phantom(&spec).unwrap();
        let noise = NoiseSpec {
            seed,
            ..NoiseSpec::default()
        };
        let sem = OracleSemanticPredictor {
            gt: p.semantic.clone(),
            noise: noise.clone(),
        };
        let inst = OracleInstancePredictor::new(p.instance.clone(), noise);
        let out = run_pipeline(&p.intensity, &[&sem], &inst, &coarse_config(spec.spacing)).unwrap();
        let ids: std::collections::BTreeSet<u16> = out
            .instance
            .data()
            .iter()
            .copied()
            .filter(|&v| v > 0 && v < 100)
            .collect();
        ok += (ids.len() == 6) as usize;
    }
    assert!(ok >= 5, "{ok} of 6 runs kept the count");
}

#[test]
fn full_size_zero_noise_is_exact_and_fast() {
    let spec = PhantomSpec {
        n_vertebrae: 9,
        fuse_pairs: vec![(5, 6)],
        seed: 17,
        ..PhantomSpec::default()
    };
    let p = generate_phantom(&spec).unwrap();
    let sem = OracleSemanticPredictor {
        gt: p.semantic.clone(),
        noise: NoiseSpec::none(),
    };
    let inst = OracleInstancePredictor::new(p.instance.clone(), NoiseSpec::none());
    let cfg = PipelineConfig {
        threads: Some(1),
        ..PipelineConfig::default()
    };
    let t = Instant::now();
    let out = run_pipeline(&p.intensity, &[&sem], &inst, &cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    assert_eq!(out.semantic.data(), p.semantic.data());
    assert_eq!(out.instance.data(), p.instance.data());
    eprintln!("full-size run: {secs:.2} s, timings {:?}", out.report.timings_ms);
    assert!(secs < 10.0, "{secs} s");
}
