//! Synthetic zone systems for benchmarking.

use odflow_core::{Coordinate, Facilities, Zone};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` zones scattered over a one-degree box split into two subregions at
/// the box's meridian.
pub fn synthetic_zones(n: usize, seed: u64) -> Vec<Zone> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let lon = -14.6 + rng.gen::<f64>();
            let facilities = Facilities {
                kindergarten: rng.gen_range(0..2),
                primary_school: rng.gen_range(0..2),
                secondary_school: u64::from(rng.gen_bool(0.2)),
                hospital: u64::from(rng.gen_bool(0.1)),
                market: u64::from(rng.gen_bool(0.1)),
            };
            Zone {
                code: format!("Z{k:04}"),
                name: format!("Zone {k}"),
                country: if rng.gen_bool(0.5) { "SN" } else { "GW" }.into(),
                subregion: if lon < -14.1 { "west" } else { "east" }.into(),
                coord: Coordinate::new(12.4 + rng.gen::<f64>(), lon).unwrap(),
                pop_female: rng.gen_range(0..2000),
                pop_male: rng.gen_range(0..2000),
                facilities,
            }
        })
        .collect()
}
