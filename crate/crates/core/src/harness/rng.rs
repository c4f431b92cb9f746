use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream type used for every sample.
pub type SampleRng = ChaCha8Rng;

/// ChaCha8 keyed by `seed_from_u64(master)` with the stream word set to
/// `stream`. Equal arguments give equal sequences; distinct streams never
/// overlap.
pub fn rng_stream(master: u64, stream: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_sequence() {
        let a: Vec<u64> = (0..64).map({ let mut r = rng_stream(7, 3); move |_| r.random() }).collect();
        let b: Vec<u64> = (0..64).map({ let mut r = rng_stream(7, 3); move |_| r.random() }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let n = 20_000;
        let mut a = rng_stream(7, 0);
        let mut b = rng_stream(7, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.random::<f64>() - 0.5).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.random::<f64>() - 0.5).collect();
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        let corr = cov * 12.0;
        // standard error of a sample correlation is about 1/sqrt(n)
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr = {corr}");

        let mean: f64 = xs.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * (1.0 / 12.0 / n as f64).sqrt());
        let mut bins = [0usize; 10];
        for x in &xs {
            bins[((x + 0.5) * 10.0) as usize] += 1;
        }
        let expected = n as f64 / 10.0;
        let chi2: f64 = bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 9 degrees of freedom, 0.999 quantile
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }

    #[test]
    fn streams_differ_from_master_change() {
        let x: u64 = rng_stream(1, 0).random();
        let y: u64 = rng_stream(2, 0).random();
        assert_ne!(x, y);
    }
}
