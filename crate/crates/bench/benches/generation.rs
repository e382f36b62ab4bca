use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use roadcell::cellgen::gen_arrivals;
use roadcell::road_data::{lag_align, synth_corridor, DiurnalShape, SynthProfile};
use roadcell::rng::{stream, Phase};
use roadcell::{generate, Corridor, GenParams, RoadSlot};

fn arrivals(c: &mut Criterion) {
    let slot = RoadSlot { slot_index: 0, flow: 120, speed: 60.0 };
    let mut rng = stream(1, 0, Phase::VehicleArrivals);
    c.bench_function("gen_arrivals/120", |b| b.iter(|| gen_arrivals(black_box(&slot), &mut rng)));
}

fn corridor_week(c: &mut Criterion) {
    let full = Corridor::us50_eastbound();
    let profile = SynthProfile::diurnal(&DiurnalShape::default());
    let mut group = c.benchmark_group("generate_one_week");
    group.sample_size(10);
    for sites in [1, 3, 8] {
        let corridor = roadcell::road_data::build_corridor(&full.specs()[..sites]).unwrap();
        let road: Vec<_> = synth_corridor(&corridor, &profile, 1, 3)
            .unwrap()
            .iter()
            .map(|r| lag_align(r).unwrap())
            .collect();
        let params = GenParams::default().with_seed(1);
        group.bench_with_input(BenchmarkId::from_parameter(sites), &road, |b, road| {
            b.iter(|| generate(&corridor, road, &params).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, arrivals, corridor_week);
criterion_main!(benches);
