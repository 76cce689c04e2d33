use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use isa_bench::{bench_temperatures, tilted_landscape};
use isa_core::dynamics::{step_isa, step_langevin, ChainState, Histogram, StreamNoise, Workspace};
use isa_core::gibbs::weights_from_energies;
use isa_core::spectral::{assemble_isa_form, assemble_langevin_form, spectral_gap};
use isa_core::Grid;

fn weights(c: &mut Criterion) {
    let t = bench_temperatures();
    let energies: Vec<(f64, f64)> = (0..1024).map(|i| (0.001 * i as f64, 1.0 - 0.0007 * i as f64)).collect();
    c.bench_function("weights_from_energies x1024", |b| {
        b.iter(|| {
            let mut s = 0.0;
            for &(h1, h2) in &energies {
                s += weights_from_energies(&t, black_box(h1), black_box(h2)).a1;
            }
            s
        })
    });
}

fn steppers(c: &mut Criterion) {
    let l = tilted_landscape();
    let p = l.potential().clone();
    let t = bench_temperatures();
    let mut noise = StreamNoise::new(1, 0);
    let mut ws = Workspace::new(p.as_ref(), None);
    let mut s = ChainState::pair(vec![0.9], vec![-1.0]);
    c.bench_function("step_isa 1d", |b| {
        b.iter(|| step_isa(&mut s, p.as_ref(), &t, 1e-3, &mut noise, &mut ws).unwrap())
    });
    let mut s = ChainState::single(vec![0.9]);
    c.bench_function("step_langevin 1d", |b| {
        b.iter(|| step_langevin(&mut s, p.as_ref(), 0.15, 1e-3, &mut noise, &mut ws).unwrap())
    });
}

fn spectral(c: &mut Criterion) {
    let l = tilted_landscape();
    let p = l.potential().clone();
    let t = bench_temperatures();
    let line = Grid::over(p.domain(), 400).unwrap();
    c.bench_function("langevin form + gap, 400 nodes", |b| {
        b.iter(|| spectral_gap(&assemble_langevin_form(p.as_ref(), 0.15, &line).unwrap()).unwrap().lambda1)
    });
    let axis = Grid::over(p.domain(), 60).unwrap();
    let square = axis.product(&axis);
    let mut group = c.benchmark_group("isa");
    group.sample_size(10);
    group.bench_function("isa form + gap, 60x60 nodes", |b| {
        b.iter(|| spectral_gap(&assemble_isa_form(p.as_ref(), &t, &square).unwrap()).unwrap().lambda1)
    });
    group.finish();
}

fn histogram(c: &mut Criterion) {
    let l = tilted_landscape();
    let p = l.potential().clone();
    let t = bench_temperatures();
    let h = Histogram::new(vec![-2.0, -2.0], vec![2.0, 2.0], vec![40, 40]).unwrap();
    let states: Vec<ChainState> = (0..4096)
        .map(|i| {
            let u = (i as f64 * 0.618_033_988_75).fract();
            let v = (i as f64 * 0.414_213_562_37).fract();
            ChainState::pair(vec![4.0 * u - 2.0], vec![4.0 * v - 2.0])
        })
        .collect();
    c.bench_function("histogram add_state x4096", |b| {
        b.iter_batched(
            || h.clone(),
            |mut h| {
                for s in &states {
                    h.add_state(s);
                }
                h
            },
            BatchSize::SmallInput,
        )
    });
    let mut group = c.benchmark_group("reference");
    group.sample_size(10);
    group.bench_function("mu reference 40x40, refine 4", |b| {
        b.iter(|| h.mu_reference(p.as_ref(), &t, 4).unwrap())
    });
    group.finish();
}

criterion_group!(kernels, weights, steppers, spectral, histogram);
criterion_main!(kernels);
