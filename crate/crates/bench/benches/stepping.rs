use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dispersia_core::integrators::{precompute, Stepper};
use dispersia_core::presets::Preset;
use dispersia_core::spectral::Fourier;
use dispersia_core::{Complex64, StepperKind};

fn one_step(c: &mut Criterion) {
    let preset = Preset::by_name("schrodinger-a1").unwrap();
    let mut group = c.benchmark_group("step");
    for kind in StepperKind::ALL {
        let cfg = preset.solve_config(2f64.powi(-6), 1e-2, kind).unwrap();
        let mut stepper = Stepper::new(precompute(&cfg).unwrap());
        let mut state = cfg.initial.sample(&cfg.grid).unwrap();
        group.bench_function(BenchmarkId::new(kind.short_name(), cfg.grid.len()), |b| {
            b.iter(|| stepper.step(black_box(state.values_mut())))
        });
    }
    group.finish();
}

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft");
    for n in [1024usize, 8192, 16384] {
        let mut plan = Fourier::new(n);
        let mut data: Vec<_> = (0..n).map(|j| {
            let x = j as f64 / n as f64;
            Complex64::new((-x * x).exp(), x)
        }).collect();
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| {
                plan.forward(black_box(&mut data));
                plan.inverse(black_box(&mut data));
            })
        });
    }
    group.finish();
}

criterion_group!(benches, one_step, fft);
criterion_main!(benches);
