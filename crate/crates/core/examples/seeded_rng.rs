//! Per-group random streams: a pure function of (master seed, group id,
//! purpose), independent of processing order or thread count.

use codeswitch::synthesizer::rng::{derive_rng, derive_seed, seed_label};
use rand::Rng;

fn main() {
    for id in ["g1", "g2", "g1"] {
        let mut rng = derive_rng(42, id, "assign");
        let draws: Vec<u32> = (0..5).map(|_| rng.random_range(0..4)).collect();
        println!("{id}: seed {} draws {draws:?}", seed_label(&derive_seed(42, id, "assign")));
    }
}
