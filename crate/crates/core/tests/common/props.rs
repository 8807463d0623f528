//! Randomized geometry checks, runnable from both the proptest suite and the
//! acceptance binary.

use std::collections::HashSet;

use dimo::geometry::{crop_around, point_in_box, scaled_size, stop_condition, stop_threshold, to_global, to_local, Point, Region};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub const CASES: u32 = 10_000;

fn runner(cases: u32) -> TestRunner {
    let cfg = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn region() -> impl Strategy<Value = Region> {
    (0u32..3000, 0u32..3000, 1u32..4000, 1u32..4000).prop_map(|(x, y, width, height)| Region { x, y, width, height })
}

/// Region plus a point inside it, on a 1/256 pixel grid so sums stay exact.
fn region_and_point() -> impl Strategy<Value = (Region, Point)> {
    region().prop_flat_map(|r| {
        (Just(r), 0..=r.width as u64 * 256, 0..=r.height as u64 * 256)
            .prop_map(|(r, kx, ky)| (r, Point::new(kx as f64 / 256.0, ky as f64 / 256.0)))
    })
}

/// Crops stay inside their parent, have size `ceil(scale * side)` and keep
/// the requested center inside.
pub fn crop_containment(cases: u32) -> Result<(), String> {
    let strategy = (region_and_point(), 0.05f64..0.95);
    run(cases, strategy, |((parent, local), scale)| {
        let center = to_global(&parent, local);
        let child = crop_around(&parent, center, scale).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(parent.contains_region(&child), "{child} not inside {parent}");
        let expect = |side: u32| ((scale * side as f64).ceil() as u32).clamp(1, side);
        prop_assert_eq!((child.width, child.height), (expect(parent.width), expect(parent.height)));
        prop_assert_eq!(child.size(), scaled_size(parent.size(), scale));
        prop_assert!(child.contains_point(&center), "{child} lost center {center:?}");
        Ok(())
    })
}

/// `to_local(to_global(p)) == p` and back, with exact equality.
pub fn round_trip(cases: u32) -> Result<(), String> {
    run(cases, region_and_point(), |(r, local)| {
        let global = to_global(&r, local);
        let back = to_local(&r, global).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back, local);
        prop_assert_eq!(to_global(&r, back), global);
        Ok(())
    })
}

/// Threshold equals diag/6 within 1e-9 and the stop test agrees with it.
pub fn stop_threshold_arithmetic(cases: u32) -> Result<(), String> {
    let strategy = (region(), -5000.0f64..5000.0, -5000.0f64..5000.0, -5000.0f64..5000.0, -5000.0f64..5000.0);
    run(cases, strategy, |(r, ax, ay, bx, by)| {
        let diag = ((r.width as f64).powi(2) + (r.height as f64).powi(2)).sqrt();
        let t = stop_threshold(&r, 1.0 / 6.0);
        prop_assert!((t - diag / 6.0).abs() < 1e-9, "threshold {t} vs {}", diag / 6.0);
        let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
        let d = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
        if (d - diag / 6.0).abs() > 1e-9 {
            prop_assert_eq!(stop_condition(&a, &b, &r), d < diag / 6.0);
        }
        Ok(())
    })
}

/// Closed-interval membership agrees with enumerating the half-pixel lattice
/// points of the box.
pub fn point_in_box_brute_force(cases: u32) -> Result<(), String> {
    let strategy = (0u32..24, 0u32..24, 1u32..24, 1u32..24, -4i64..110, -4i64..110);
    run(cases, strategy, |(x, y, width, height, i, j)| {
        let b = Region { x, y, width, height };
        let mut inside = HashSet::new();
        for u in 2 * x as i64..=2 * (x + width) as i64 {
            for v in 2 * y as i64..=2 * (y + height) as i64 {
                inside.insert((u, v));
            }
        }
        let p = Point::new(i as f64 / 2.0, j as f64 / 2.0);
        prop_assert_eq!(point_in_box(&p, &b), inside.contains(&(i, j)));
        Ok(())
    })
}
