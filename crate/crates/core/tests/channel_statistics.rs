use lsa_precoding::channel::{build_covariances, substream, ChannelSampler, ScenarioConfig, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;

const DRAWS: usize = 100_000;

#[test]
fn sample_covariances_match_model() {
    let cfg = ScenarioConfig {
        m1: 3,
        m2: 4,
        rho: 0.7,
        beta: [[1.0, 0.3], [0.5, 2.0]],
        ..Default::default()
    };
    let cov = build_covariances(&cfg).unwrap();
    let sampler = ChannelSampler::new(&cov).unwrap();
    let mut rng = substream(42, 0, 0);

    let links = [(0usize, 0usize), (0, 1), (1, 0), (1, 1)];
    let dims: Vec<usize> = links.iter().map(|&(_, tx)| cov.r[0][tx].dim()).collect();
    let mut acc: Vec<DMatrix<Complex64>> = dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    let mut sq: Vec<DMatrix<f64>> = dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    let mut independence = Complex64::new(0.0, 0.0);
    for _ in 0..DRAWS {
        let d = sampler.sample(&mut rng);
        for (k, &(rx, tx)) in links.iter().enumerate() {
            let h = &d.h[rx][tx];
            let outer = h * h.adjoint();
            sq[k] += outer.map(|z| z.norm_sqr());
            acc[k] += outer;
        }
        independence += d.h[0][0][0] * d.h[1][0][0].conj();
    }
    let n = DRAWS as f64;
    for (k, &(rx, tx)) in links.iter().enumerate() {
        let target = cov.r[rx][tx].as_matrix();
        let mean = &acc[k] / Complex64::new(n, 0.0);
        for i in 0..target.nrows() {
            for j in 0..target.ncols() {
                let var = (sq[k][(i, j)] / n - mean[(i, j)].norm_sqr()).max(1e-30);
                let se = (var / n).sqrt();
                let err = (mean[(i, j)] - target[(i, j)]).norm();
                // complex error has two components; 4 se keeps the family-wise rate low
                assert!(err <= 4.0 * se, "link ({rx},{tx}) entry ({i},{j}): err {err}, se {se}");
            }
        }
    }
    let cross = independence / n;
    assert!(cross.norm() < 4.0 * (cfg.beta[1][0] / n).sqrt(), "{cross}");
}

#[test]
fn direct_link_energy_equals_trace() {
    let cfg = ScenarioConfig::default();
    let cov = build_covariances(&cfg).unwrap();
    let sampler = ChannelSampler::new(&cov).unwrap();
    let mut rng = substream(7, 1, 0);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..DRAWS {
        let e = sampler
            .sample(&mut rng)
            .link(Side::Incumbent, Side::Incumbent)
            .norm_squared();
        sum += e;
        sum_sq += e * e;
    }
    let n = DRAWS as f64;
    let mean = sum / n;
    let se = ((sum_sq / n - mean * mean) / n).sqrt();
    assert!((mean - 4.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn substreams_are_reproducible_and_distinct() {
    let cov = build_covariances(&ScenarioConfig::default()).unwrap();
    let sampler = ChannelSampler::new(&cov).unwrap();
    let a = sampler.sample(&mut substream(1, 2, 3));
    let b = sampler.sample(&mut substream(1, 2, 3));
    let c = sampler.sample(&mut substream(1, 2, 4));
    let d = sampler.sample(&mut substream(1, 3, 3));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_ne!(a, d);
}
