#![allow(dead_code)]

use std::path::PathBuf;

use odflow_core::{
    load_zones, read_od_csv, AttractionVector, Coordinate, Facilities, ImpedanceMatrix,
    LoadOptions, ODMatrix, ProductionVector, Purpose, SquareMatrix, Zone, ZoneTable,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn fixture_zones() -> ZoneTable {
    load_zones(fixtures_dir().join("zones.csv"), &LoadOptions::default()).unwrap()
}

pub fn fixture_without() -> ODMatrix {
    read_od_csv(fixtures_dir().join("od_without.csv")).unwrap()
}

pub fn fixture_with() -> ODMatrix {
    read_od_csv(fixtures_dir().join("od_with.csv")).unwrap()
}

/// Random zone system: `n` zones in a one-degree box, 2-3 partitions, sparse
/// facilities so that some purposes are unreachable from some partitions.
pub fn random_zones(rng: &mut ChaCha8Rng, n: usize) -> Vec<Zone> {
    let partitions = rng.gen_range(2..=3);
    (0..n)
        .map(|k| {
            let mut facilities = Facilities::default();
            for p in Purpose::ALL {
                if rng.gen_bool(0.35) {
                    facilities.set(p, rng.gen_range(1..4));
                }
            }
            let part = if k < partitions {
                k
            } else {
                rng.gen_range(0..partitions)
            };
            Zone {
                code: format!("Z{k}"),
                name: format!("Zone {k}"),
                country: if rng.gen_bool(0.5) { "SN" } else { "GW" }.into(),
                subregion: format!("P{part}"),
                coord: Coordinate::new(12.3 + rng.gen::<f64>(), -14.8 + rng.gen::<f64>()).unwrap(),
                pop_female: rng.gen_range(0..3000),
                pop_male: rng.gen_range(0..3000),
                facilities,
            }
        })
        .collect()
}

pub fn codes(zones: &[Zone]) -> Vec<String> {
    zones.iter().map(|z| z.code.clone()).collect()
}

pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Random production and attraction vectors sharing a purpose.
pub fn random_pa(rng: &mut ChaCha8Rng, n: usize) -> (ProductionVector, AttractionVector) {
    let purpose = *Purpose::ALL.choose(rng).unwrap();
    let p = (0..n).map(|_| rng.gen_range(0.0..50_000.0)).collect();
    let mut a: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.6) {
                rng.gen_range(0.1..5.0)
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = a.iter().sum();
    if total > 0.0 {
        a.iter_mut().for_each(|v| *v /= total);
    }
    (
        ProductionVector { purpose, values: p },
        AttractionVector { purpose, values: a },
    )
}

/// Friction factors evaluated straight from a distance matrix without going
/// through the library's impedance construction.
pub fn oracle_friction(w: &SquareMatrix, beta: f64, partitions: Option<&[&str]>) -> SquareMatrix {
    SquareMatrix::from_fn(w.dim(), |i, j| match partitions {
        Some(p) if p[i] != p[j] => 0.0,
        _ => (-beta * w[(i, j)].ln()).exp(),
    })
}

/// Term-by-term evaluation of the production-constrained gravity formula.
pub fn oracle_distribute(p: &[f64], a: &[f64], f: &SquareMatrix) -> SquareMatrix {
    let n = p.len();
    let mut q = SquareMatrix::zeros(n);
    for i in 0..n {
        let mut denominator = 0.0;
        for x in (0..n).rev() {
            denominator += a[x] * f[(i, x)];
        }
        if denominator == 0.0 {
            continue;
        }
        for j in 0..n {
            q[(i, j)] = p[i] * a[j] * f[(i, j)] / denominator;
        }
    }
    q
}

pub fn impedance(
    zones: &[Zone],
    w: &SquareMatrix,
    beta: f64,
    partitions: Option<&[&str]>,
) -> ImpedanceMatrix {
    ImpedanceMatrix::from_distances(codes(zones), "test", w, beta, partitions).unwrap()
}

/// `|a - b| <= tol * max(|a|, |b|)`, exact equality required at zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub fn matrices_close(a: &SquareMatrix, b: &SquareMatrix, tol: f64) -> Result<(), String> {
    if a.dim() != b.dim() {
        return Err(format!("dimension {} vs {}", a.dim(), b.dim()));
    }
    for (i, j, v) in a.cells() {
        let w = b[(i, j)];
        if !rel_close(v, w, tol) {
            return Err(format!("cell ({i}, {j}): {v} vs {w}"));
        }
    }
    Ok(())
}
