use nonuniform_fountain::codec::InputBlock;
use nonuniform_fountain::degree::{robust_soliton, DegreeDistribution, DegreeSource, RobustSolitonParams};
use nonuniform_fountain::encoders::{
    dnc_next, lt_next, DncState, LabelState, NonuniformSelector, SelectionMode, Shortfall,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K: usize = 32;
const DRAWS: usize = 100_000;

fn block(k: usize) -> InputBlock {
    InputBlock::new((0..k).map(|i| vec![i as u8]).collect()).unwrap()
}

/// Upper 0.1% point of chi-square with `df` degrees of freedom
/// (Wilson-Hilferty).
fn chi2_critical(df: usize) -> f64 {
    let df = df as f64;
    let z = 3.09;
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + z * a.sqrt()).powi(3)
}

fn chi2(observed: &[usize], expected: &[f64]) -> (f64, usize) {
    let mut stat = 0.0;
    let mut bins = 0;
    for (o, e) in observed.iter().zip(expected) {
        if *e >= 5.0 {
            stat += (*o as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    (stat, bins - 1)
}

/// Checks degree and neighbor-occupancy counts against what LT produces.
fn assert_lt_like(name: &str, dist: &DegreeDistribution, mut draw: impl FnMut() -> Vec<usize>) {
    let mut degrees = vec![0usize; K];
    let mut hits = vec![0usize; K];
    let mut total = 0usize;
    for _ in 0..DRAWS {
        let nb = draw();
        let mut sorted = nb.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), nb.len(), "{name}: repeated neighbor");
        degrees[nb.len() - 1] += 1;
        for j in nb {
            hits[j] += 1;
        }
        total += sorted.len();
    }
    let expected: Vec<f64> = dist.pmf().iter().map(|p| p * DRAWS as f64).collect();
    let (stat, df) = chi2(&degrees, &expected);
    assert!(stat < chi2_critical(df), "{name}: degree chi2 {stat:.1} on {df} df");
    let uniform = vec![total as f64 / K as f64; K];
    let (stat, df) = chi2(&hits, &uniform);
    assert!(stat < chi2_critical(df), "{name}: neighbor chi2 {stat:.1} on {df} df");
}

#[test]
fn encoders_without_feedback_look_like_lt() {
    let dist = robust_soliton(&RobustSolitonParams::with_defaults(K).unwrap()).unwrap();
    let b = block(K);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    assert_lt_like("lt", &dist, || lt_next(&b, &dist, 0, &mut rng).unwrap().neighbors);

    let state = DncState::new(K, DegreeSource::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    assert_lt_like("dnc", &dist, || dnc_next(&b, &state, 0, &mut rng).unwrap().neighbors);

    // All-Distance and Quantized share the selector; with no reports every
    // label is zero.
    let sel = NonuniformSelector::with_shortfall(&LabelState::new(K), Shortfall::FillFromU);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    assert_lt_like("labels", &dist, || {
        let d = dist.sample_degree(&mut rng);
        sel.select(d, SelectionMode::Probabilistic, &mut rng)
    });
}

#[test]
fn truncating_selector_starts_with_single_inputs() {
    let sel = NonuniformSelector::new(&LabelState::new(K));
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for d in 1..=K {
        assert_eq!(sel.select(d, SelectionMode::Probabilistic, &mut rng).len(), 1);
    }
}

/// Exact probability of drawing the unordered set `picks` from `pool`
/// (sequential draw-and-renormalize).
fn set_probability(weights: &[f64], picks: &[usize]) -> f64 {
    if picks.is_empty() {
        return 1.0;
    }
    let total: f64 = weights.iter().sum();
    let mut p = 0.0;
    for (i, &first) in picks.iter().enumerate() {
        let mut rest_w = weights.to_vec();
        rest_w[first] = 0.0;
        let rest: Vec<usize> = picks.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &x)| x).collect();
        p += weights[first] / total * set_probability(&rest_w, &rest);
    }
    p
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    if size == 0 {
        return vec![vec![]];
    }
    (0..n)
        .flat_map(|last| {
            subsets(last, size - 1).into_iter().map(move |mut s| {
                s.push(last);
                s
            })
        })
        .collect()
}

#[test]
fn selection_mode_is_the_deterministic_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut checked = 0;
    while checked < 300 {
        let k = rng.gen_range(3..=10);
        let d = rng.gen_range(1..=4.min(k));
        let q: Vec<f64> = (0..k).map(|_| (rng.gen_range(0..1000) as f64) / 999.0).collect();
        let mut sorted = q.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let u: Vec<usize> = (0..k).filter(|&j| q[j] < 0.5).collect();
        let dset: Vec<usize> = (0..k).filter(|&j| q[j] >= 0.5).collect();
        if sorted.len() < k || u.is_empty() || dset.len() < d - 1 {
            continue;
        }
        let uw: Vec<f64> = u.iter().map(|&j| 1.0 - q[j]).collect();
        let dw: Vec<f64> = dset.iter().map(|&j| q[j]).collect();
        let mut best = (f64::MIN, Vec::new());
        let mut second = f64::MIN;
        for ui in 0..u.len() {
            for ds in subsets(dset.len(), d - 1) {
                let p = uw[ui] / uw.iter().sum::<f64>() * set_probability(&dw, &ds);
                let mut set: Vec<usize> = ds.iter().map(|&i| dset[i]).collect();
                set.push(u[ui]);
                set.sort_unstable();
                if p > best.0 {
                    second = best.0;
                    best = (p, set);
                } else if p > second {
                    second = p;
                }
            }
        }
        if best.0 - second < 1e-12 {
            continue;
        }
        // Deterministic optimum: smallest q in U, largest d - 1 in D.
        let mut opt = vec![*u.iter().min_by(|&&a, &&b| q[a].total_cmp(&q[b])).unwrap()];
        let mut by_q = dset.clone();
        by_q.sort_by(|&a, &b| q[b].total_cmp(&q[a]));
        opt.extend(&by_q[..d - 1]);
        opt.sort_unstable();
        assert_eq!(best.1, opt, "q = {q:?}, d = {d}");

        let labels = LabelState::from_estimates(q.clone()).unwrap();
        let sel = NonuniformSelector::new(&labels);
        assert_eq!(sel.select(d, SelectionMode::Deterministic, &mut rng), opt);
        checked += 1;
    }
}

#[test]
fn deleted_inputs_are_never_sent() {
    let b = block(K);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut state = DncState::new(K, DegreeSource::default()).unwrap();
    for round in 0..20 {
        let ack: Vec<usize> = (0..3).map(|_| rng.gen_range(0..K)).collect();
        state.dnc_ack(&ack).unwrap();
        if state.active().is_empty() {
            break;
        }
        for _ in 0..500 {
            let y = dnc_next(&b, &state, round, &mut rng).unwrap();
            assert!(y.neighbors.iter().all(|&j| !state.is_deleted(j)));
            assert!(y.degree() <= state.active().len());
        }
    }
}
