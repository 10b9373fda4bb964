mod common;

use common::*;
use diqa::predict::{net, ArchDescriptor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn forward_matches_direct_loops_on_toy_arch() {
    let arch = ArchDescriptor::new(1, 4, 4, vec![2, 3]).unwrap();
    let mut ws = net::Workspace::new(&arch);
    for seed in 0..20 {
        let p = random_problem(arch.clone(), 1, seed);
        let got = net::forward(&p.params, &p.inputs[0], &mut ws);
        let want = oracle_forward(&arch, &p.params, &p.inputs[0]);
        assert!((got - want).abs() < 1e-10, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn forward_matches_direct_loops_on_odd_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..10 {
        let arch = ArchDescriptor::new(
            rng.random_range(1..3),
            rng.random_range(4..13),
            rng.random_range(4..13),
            vec![rng.random_range(1..4), rng.random_range(1..4)],
        )
        .unwrap()
        .with_standardized_input(seed % 2 == 1);
        let p = random_problem(arch.clone(), 1, seed);
        let got = net::forward(&p.params, &p.inputs[0], &mut net::Workspace::new(&arch));
        let want = oracle_forward(&arch, &p.params, &p.inputs[0]);
        assert!((got - want).abs() < 1e-10, "{arch:?}");
    }
}

#[test]
fn gradients_match_central_differences() {
    for (a, arch) in gradient_check_archs().into_iter().enumerate() {
        for b in 0..3 {
            let p = random_problem(arch.clone(), 3, (a * 10 + b) as u64);
            let err = max_gradient_error(&p, 1e-4, 1e-5);
            assert!(err < 1e-4, "arch {a} batch {b}: relative error {err}");
        }
    }
}

#[test]
fn f32_forward_tracks_f64() {
    let arch = ArchDescriptor::new(1, 8, 16, vec![3, 4]).unwrap();
    let p = random_problem(arch.clone(), 1, 5);
    let p32: Vec<f32> = p.params.iter().map(|&v| v as f32).collect();
    let x32: Vec<f32> = p.inputs[0].iter().map(|&v| v as f32).collect();
    let y32 = net::forward(&p32, &x32, &mut net::Workspace::new(&arch));
    let y64 = net::forward(&p.params, &p.inputs[0], &mut net::Workspace::new(&arch));
    assert!((f64::from(y32) - y64).abs() < 1e-5);
}

#[test]
fn standardized_input_ignores_affine_intensity_changes() {
    let arch = ArchDescriptor::new(1, 8, 12, vec![3, 2])
        .unwrap()
        .with_standardized_input(true);
    let p = random_problem(arch.clone(), 1, 3);
    let mut ws = net::Workspace::new(&arch);
    let base = net::forward(&p.params, &p.inputs[0], &mut ws);
    let shifted: Vec<f64> = p.inputs[0].iter().map(|v| 0.3 + 2.0 * v).collect();
    // The variance floor makes the invariance approximate.
    assert!((net::forward(&p.params, &shifted, &mut ws) - base).abs() < 1e-3 * base.abs().max(1.0));
    let flat = vec![0.7; arch.input_len()];
    let zero = vec![0.0; arch.input_len()];
    let (a, b) = (net::forward(&p.params, &flat, &mut ws), net::forward(&p.params, &zero, &mut ws));
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}
