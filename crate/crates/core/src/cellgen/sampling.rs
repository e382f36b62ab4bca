use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::{
    CallRecord, CallSegment, DurationComponent, GenParams, SegmentKind, Termination,
    VehicleTransit,
};
use crate::error::{Error, Result};
use crate::road_data::{RoadSlot, SLOT_MINUTES};

pub const MIN_DWELL_MIN: f64 = 0.05;
pub const MAX_DWELL_MIN: f64 = 120.0;
const SPEED_NOISE_BOUND: f64 = 0.9;

/// Arrival times (minutes) of exactly `slot.flow` vehicles inside the slot.
///
/// A Poisson process conditioned on its count in an interval has the law of
/// sorted i.i.d. uniforms, which keeps the measured count exact.
pub fn gen_arrivals<R: Rng + ?Sized>(slot: &RoadSlot, rng: &mut R) -> Vec<f64> {
    let start = slot.slot_index as f64 * SLOT_MINUTES;
    let mut times: Vec<f64> = (0..slot.flow)
        .map(|_| start + rng.random::<f64>() * SLOT_MINUTES)
        .collect();
    times.sort_by(f64::total_cmp);
    times
}

/// Minutes spent crossing a cell of `range_miles` at a perturbed speed.
pub fn dwell_time<R: Rng + ?Sized>(
    range_miles: f64,
    speed_mph: f64,
    params: &GenParams,
    rng: &mut R,
) -> Result<f64> {
    if !(range_miles > 0.0) {
        return Err(Error::Validation(format!("cell range must be positive, got {range_miles}")));
    }
    if !(speed_mph > 0.0) || !speed_mph.is_finite() {
        return Err(Error::Validation(format!("speed must be positive, got {speed_mph}")));
    }
    let eta = loop {
        let z: f64 = StandardNormal.sample(rng);
        let eta = params.speed_noise_std * z;
        if eta.abs() < SPEED_NOISE_BOUND {
            break eta;
        }
    };
    let dwell = 60.0 * range_miles / (speed_mph * (1.0 + eta));
    Ok(dwell.clamp(MIN_DWELL_MIN, MAX_DWELL_MIN))
}

/// Underlying normal parameters `(mu, sigma^2)` of a log-normal with the
/// given mean and variance.
pub fn lognormal_params(mean: f64, variance: f64) -> (f64, f64) {
    let sigma2 = (1.0 + variance / (mean * mean)).ln();
    (mean.ln() - sigma2 / 2.0, sigma2)
}

/// One call duration (minutes) from the log-normal mixture.
pub fn sample_duration<R: Rng + ?Sized>(mix: &[DurationComponent], rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = mix.last().expect("non-empty mixture");
    for c in mix {
        acc += c.weight;
        if u < acc {
            chosen = c;
            break;
        }
    }
    let (mu, sigma2) = lognormal_params(chosen.mean_min, chosen.variance_min2);
    let z: f64 = StandardNormal.sample(rng);
    (mu + sigma2.sqrt() * z).exp()
}

/// Calls placed during one transit: Poisson starts of rate lambda on
/// `[arrival, departure)`, each with an independent duration. The returned
/// records carry only their first segment, cut at the vehicle's departure,
/// and `call_id` 0.
pub fn gen_calls_for_transit<R: Rng + ?Sized>(
    transit: &VehicleTransit,
    params: &GenParams,
    rng: &mut R,
) -> Vec<CallRecord> {
    let gap = Exp::new(params.lambda_per_min).expect("lambda validated positive");
    let mut calls = Vec::new();
    let mut t = transit.arrival_time + gap.sample(rng);
    while t < transit.departure_time {
        let duration = sample_duration(&params.duration_mix, rng);
        let end = t + duration;
        let (leave, termination) = if end <= transit.departure_time {
            (end, Termination::Completed)
        } else {
            (transit.departure_time, Termination::Pending)
        };
        calls.push(CallRecord {
            call_id: 0,
            vehicle_id: transit.vehicle_id,
            start_time: t,
            total_duration_min: duration,
            segments: vec![CallSegment {
                cell_position: transit.cell_position,
                enter_time: t,
                leave_or_end_time: leave,
                kind: SegmentKind::New,
            }],
            termination,
        });
        t += gap.sample(rng);
    }
    calls
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Phase};

    fn params(noise: f64) -> GenParams {
        GenParams { speed_noise_std: noise, ..GenParams::default() }
    }

    fn mean_std(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn arrivals_count_and_order() {
        let mut rng = stream(1, 0, Phase::VehicleArrivals);
        assert!(gen_arrivals(&RoadSlot { slot_index: 4, flow: 0, speed: 60.0 }, &mut rng).is_empty());
        let times = gen_arrivals(&RoadSlot { slot_index: 4, flow: 3, speed: 60.0 }, &mut rng);
        assert_eq!(times.len(), 3);
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        assert!(times.iter().all(|&t| (20.0..25.0).contains(&t)));
    }

    #[test]
    fn arrivals_pass_ks_against_uniform() {
        // KS statistic of 1000 offsets vs U(0, 5); 1% critical value 1.628/sqrt(n).
        let mut rng = stream(2, 0, Phase::VehicleArrivals);
        let times = gen_arrivals(&RoadSlot { slot_index: 0, flow: 1000, speed: 60.0 }, &mut rng);
        let n = times.len() as f64;
        let d = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let f = t / SLOT_MINUTES;
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn dwell_is_range_over_speed() {
        let mut rng = stream(3, 0, Phase::VehicleArrivals);
        assert!((dwell_time(5.0, 60.0, &params(0.0), &mut rng).unwrap() - 5.0).abs() < 1e-12);
        assert!((dwell_time(7.67, 60.0, &params(0.0), &mut rng).unwrap() - 7.67).abs() < 1e-12);
    }

    #[test]
    fn dwell_noise_moments() {
        // E[5/(1+eta)] ~ 5(1 + s^2), sd ~ 5 s for s = 0.05.
        let mut rng = stream(4, 0, Phase::VehicleArrivals);
        let p = params(0.05);
        let xs: Vec<f64> = (0..10_000).map(|_| dwell_time(5.0, 60.0, &p, &mut rng).unwrap()).collect();
        let (mean, std) = mean_std(&xs);
        assert!((mean - 5.0).abs() <= 0.05, "mean {mean}");
        assert!((std - 0.25).abs() <= 0.025, "std {std}");
    }

    #[test]
    fn dwell_clamped_and_guarded() {
        let mut rng = stream(5, 0, Phase::VehicleArrivals);
        let p = params(0.0);
        assert_eq!(dwell_time(100.0, 5.0, &p, &mut rng).unwrap(), MAX_DWELL_MIN);
        assert_eq!(dwell_time(0.001, 80.0, &p, &mut rng).unwrap(), MIN_DWELL_MIN);
        assert!(dwell_time(1.0, 0.0, &p, &mut rng).is_err());
        assert!(dwell_time(0.0, 60.0, &p, &mut rng).is_err());
    }

    #[test]
    fn lognormal_moment_inversion() {
        let (mu, s2) = lognormal_params(1.0, 3.0);
        assert!((s2 - 4f64.ln()).abs() < 1e-12);
        assert!((mu + 4f64.ln() / 2.0).abs() < 1e-12);
        assert!((s2 - 2.0 * std::f64::consts::LN_2).abs() < 1e-6 && (mu + std::f64::consts::LN_2).abs() < 1e-6);

        let (mu, s2) = lognormal_params(10.0, 30.0);
        assert!((s2 - 0.262_364).abs() < 1e-6, "{s2}");
        assert!((mu - 2.171_403).abs() < 1e-6, "{mu}");
    }

    #[test]
    fn single_component_sample_mean() {
        let mix = [DurationComponent { weight: 1.0, mean_min: 1.0, variance_min2: 3.0 }];
        let mut rng = stream(6, 0, Phase::VehicleArrivals);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_duration(&mix, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() <= 0.02, "mean {mean}");
    }

    #[test]
    fn mixture_sample_mean() {
        let mix = GenParams::default().duration_mix;
        let mut rng = stream(7, 0, Phase::VehicleArrivals);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_duration(&mix, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 5.5).abs() <= 0.11, "mean {mean}");
    }

    #[test]
    fn calls_per_transit_mean_is_lambda_dwell() {
        let p = GenParams::default();
        let mut rng = stream(8, 0, Phase::VehicleArrivals);
        let n = 100_000;
        let mut total = 0usize;
        for i in 0..n {
            let t = VehicleTransit::new(i, 0, 0.0, 5.0);
            let calls = gen_calls_for_transit(&t, &p, &mut rng);
            for c in &calls {
                assert!(c.start_time >= 0.0 && c.start_time < 5.0);
                assert_eq!(c.segments[0].kind, SegmentKind::New);
            }
            total += calls.len();
        }
        let mean = total as f64 / n as f64;
        assert!((mean - 1.0).abs() <= 0.02, "mean {mean}");
    }

    #[test]
    fn tiny_dwell_gives_no_calls() {
        let p = GenParams::default();
        let mut rng = stream(9, 0, Phase::VehicleArrivals);
        let t = VehicleTransit::new(0, 0, 0.0, 1e-12);
        let total: usize = (0..1000).map(|_| gen_calls_for_transit(&t, &p, &mut rng).len()).sum();
        assert_eq!(total, 0);
    }

    #[test]
    fn calls_are_deterministic_per_stream() {
        let p = GenParams::default();
        let t = VehicleTransit::new(0, 0, 10.0, 30.0);
        let a = gen_calls_for_transit(&t, &p, &mut stream(1, 2, Phase::VehicleArrivals));
        let b = gen_calls_for_transit(&t, &p, &mut stream(1, 2, Phase::VehicleArrivals));
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }
}
