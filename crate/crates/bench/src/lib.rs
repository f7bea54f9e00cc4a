//! Synthetic inputs shared by the benchmarks.

use embias::cooccur::{self, CoocTable};
use embias::corpus::TokenStream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `len` ids over `vocab_size` words with a roughly Zipfian frequency
/// profile, so the table has the long sparse tail of real text.
pub fn zipf_stream(len: usize, vocab_size: u32, seed: u64) -> TokenStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = (0..len)
        .map(|_| {
            let u: f64 = rng.random_range(0.0..1.0);
            ((vocab_size as f64).powf(u) as u32 - 1).min(vocab_size - 1)
        })
        .collect();
    TokenStream::new(ids, vocab_size as usize).expect("ids are in range")
}

pub fn zipf_table(len: usize, vocab_size: u32, window: usize, seed: u64) -> CoocTable {
    cooccur::count(&zipf_stream(len, vocab_size, seed), window, true).expect("valid window")
}
