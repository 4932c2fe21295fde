use super::*;
use crate::world::{generate_world, ground_truth_crop, observe, Heading, ObsConfig, Pose, WorldConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample_at(size: usize, seed: u64) -> TrainingSample {
    let world = generate_world(seed, &WorldConfig::sized(48, 48)).unwrap();
    let free = world.free_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = free[rng.gen_range(0..free.len())];
    let pose = Pose { cell, heading: Heading::ALL[rng.gen_range(0..4)] };
    let cfg = ObsConfig { crop_size: size, ..ObsConfig::default() };
    let obs = observe(&world, pose, &cfg, &mut rng);
    let (occ, sem) = ground_truth_crop(&world, pose, size);
    TrainingSample {
        size,
        input_occupancy: obs.occupancy,
        input_semantics: obs.semantics,
        target_occupancy: occ,
        target_semantics: sem,
    }
}

fn arch(size: usize, c: usize) -> ArchConfig {
    ArchConfig { crop_size: size, base_channels: c, ..ArchConfig::default() }
}

fn inputs(p: &TwoStagePredictor, s: &TrainingSample) -> (Tensor3, Tensor3) {
    p.sample_tensors(s).unwrap()
}

#[test]
fn outputs_are_normalized_and_deterministic() {
    let s = sample_at(33, 1);
    let p = TwoStagePredictor::new(ArchConfig::default(), 5);
    let (o, m) = inputs(&p, &s);
    let a = p.predict(&o, &m).unwrap();
    assert!(a.occupancy.max_normalization_error() < 1e-6);
    assert!(a.semantics.max_normalization_error() < 1e-6);
    let b = p.predict(&o, &m).unwrap();
    assert_eq!(a, b);
}

#[test]
fn distinct_seeds_give_distinct_outputs() {
    let s = sample_at(17, 2);
    let a = TwoStagePredictor::new(arch(17, 4), 1);
    let b = TwoStagePredictor::new(arch(17, 4), 2);
    assert_ne!(a.params.theta_o, b.params.theta_o);
    let (o, m) = inputs(&a, &s);
    let pa = a.predict(&o, &m).unwrap().semantics;
    let pb = b.predict(&o, &m).unwrap().semantics;
    let linf = pa.data.iter().zip(&pb.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(linf > 1e-6);
}

#[test]
fn shape_and_channel_mismatches_are_errors() {
    let p = TwoStagePredictor::new(arch(17, 4), 1);
    let bad = Tensor3::zeros(3, 15, 15);
    assert!(matches!(p.predict_occupancy(&bad), Err(PredictorError::ShapeMismatch { .. })));
    let occ = Tensor3::zeros(3, 17, 17);
    let sem = Tensor3::zeros(8, 17, 17);
    assert!(p.predict_semantics(&occ, &sem).is_err());
}

/// Central finite differences of the total loss against the analytic
/// gradient on 20 random coordinates per stage.
#[test]
fn analytic_gradient_matches_finite_differences() {
    let s = sample_at(17, 3);
    let p = TwoStagePredictor::new(arch(17, 4), 11);
    let mut go = vec![0.0; p.params.theta_o.len()];
    let mut gs = vec![0.0; p.params.theta_s.len()];
    p.accumulate_gradient(&s, 1.0, 1.0, &mut go, &mut gs).unwrap();
    let total = |to: &[f64], ts: &[f64]| {
        let l = p.loss_with(to, ts, &s).unwrap();
        l.occupancy + l.semantic
    };
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for stage in 0..2 {
        let len = if stage == 0 { go.len() } else { gs.len() };
        for _ in 0..20 {
            let j = rng.gen_range(0..len);
            let (mut to, mut ts) = (p.params.theta_o.clone(), p.params.theta_s.clone());
            let theta = if stage == 0 { &mut to } else { &mut ts };
            theta[j] += h;
            let plus = total(&to, &ts);
            let theta = if stage == 0 { &mut to } else { &mut ts };
            theta[j] -= 2.0 * h;
            let minus = total(&to, &ts);
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = if stage == 0 { go[j] } else { gs[j] };
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-7);
            assert!(rel < 1e-3, "stage {stage} param {j}: numeric {numeric} analytic {analytic}");
        }
    }
}

#[test]
fn semantic_loss_reaches_occupancy_parameters() {
    let s = sample_at(17, 4);
    let p = TwoStagePredictor::new(arch(17, 4), 3);
    let mut go = vec![0.0; p.params.theta_o.len()];
    let mut gs = vec![0.0; p.params.theta_s.len()];
    // occupancy loss weight 0 via a zero-scaled pass is not available, so
    // probe the semantic term alone by finite differences
    let sem_loss = |to: &[f64]| p.loss_with(to, &p.params.theta_s, &s).unwrap().semantic;
    // bias of the last occupancy logit feeds p̂ everywhere
    let j = p.params.theta_o.len() - 1;
    let mut plus = p.params.theta_o.clone();
    plus[j] += 1e-5;
    let mut minus = p.params.theta_o.clone();
    minus[j] -= 1e-5;
    let fd = (sem_loss(&plus) - sem_loss(&minus)) / 2e-5;
    assert!(fd.abs() > 1e-8, "semantic loss does not depend on theta_o: {fd}");
    p.accumulate_gradient(&s, 1.0, 1.0, &mut go, &mut gs).unwrap();
    assert!(go.iter().any(|g| *g != 0.0));
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = vec![sample_at(17, 5), sample_at(17, 6)];
    let mut e = Ensemble::new(arch(17, 4), 2, 1);
    let before = e.clone();
    let cfg = TrainConfig { learning_rate: 0.0, epochs: 2, batch_size: 1, ..TrainConfig::default() };
    train(&mut e, &data, &cfg).unwrap();
    assert_eq!(e, before);
}

#[test]
fn empty_dataset_is_rejected() {
    let mut e = Ensemble::new(arch(17, 4), 2, 1);
    assert_eq!(train(&mut e, &[], &TrainConfig::default()), Err(PredictorError::EmptyDataset));
}

#[test]
fn training_is_deterministic_and_member_independent() {
    let data: Vec<_> = (0..4).map(|i| sample_at(17, 20 + i)).collect();
    let cfg = TrainConfig { learning_rate: 1e-3, epochs: 1, batch_size: 2, ..TrainConfig::default() };
    let mut a = Ensemble::new(arch(17, 4), 2, 7);
    let mut b = a.clone();
    let la = train(&mut a, &data, &cfg).unwrap();
    let lb = train(&mut b, &data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    // training member 1 alone reproduces its ensemble-trained parameters
    let mut solo = Ensemble::new(arch(17, 4), 2, 7).members[1].clone();
    train_member(&mut solo, 1, &data, &cfg).unwrap();
    assert_eq!(solo, a.members[1]);
}

#[test]
fn loss_decreases_on_a_fixed_batch_with_small_steps() {
    let data: Vec<_> = (0..2).map(|i| sample_at(17, 40 + i)).collect();
    let cfg = TrainConfig { learning_rate: 2e-4, epochs: 10, batch_size: 2, ..TrainConfig::default() };
    let mut e = Ensemble::new(arch(17, 4), 1, 3);
    let log = train(&mut e, &data, &cfg).unwrap();
    for w in log.windows(2) {
        assert!(w[1].l_total <= w[0].l_total + 1e-12, "{:?}", w);
    }
}

#[test]
fn overfits_a_single_sample() {
    let s = sample_at(33, 8);
    let mut e = Ensemble::new(ArchConfig::default(), 1, 2);
    let cfg = TrainConfig { learning_rate: 5e-3, epochs: 500, batch_size: 1, ..TrainConfig::default() };
    let log = train(&mut e, core::slice::from_ref(&s), &cfg).unwrap();
    assert_eq!(log.len(), 500);
    let l = e.members[0].loss(&s).unwrap();
    assert!(l.occupancy < 0.1 && l.semantic < 0.1, "{l:?}");
    let (o, m) = inputs(&e.members[0], &s);
    let pred = e.members[0].predict_occupancy(&o).unwrap().argmax();
    let agree = pred.iter().zip(&s.target_occupancy).filter(|(a, b)| a == b).count();
    assert!(agree as f64 >= 0.95 * pred.len() as f64);
    let sem = e.members[0].predict_semantics(&e.members[0].predict_occupancy(&o).unwrap(), &m).unwrap();
    assert!(sem.max_normalization_error() < 1e-6);
}

#[test]
fn ensemble_prediction_shapes_and_duplicates() {
    let s = sample_at(17, 9);
    let one = Ensemble::new(arch(17, 4), 1, 4);
    let (o, m) = inputs(&one.members[0], &s);
    let single = one.ensemble_predict(&o, &m).unwrap();
    assert_eq!(single.len(), 1);
    assert_eq!(single[0], one.members[0].predict(&o, &m).unwrap().semantics);

    let dup = Ensemble::from_members(vec![one.members[0].clone(); 3]).unwrap();
    let outs = dup.ensemble_predict(&o, &m).unwrap();
    assert!(outs.iter().all(|x| *x == outs[0]));

    let four = Ensemble::new(arch(17, 4), 4, 4);
    let outs = four.ensemble_predict(&o, &m).unwrap();
    assert_eq!(outs.len(), 4);
    let mut rev = four.clone();
    rev.members.reverse();
    let mut routs = rev.ensemble_predict(&o, &m).unwrap();
    routs.reverse();
    assert_eq!(outs, routs);
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let e = Ensemble::new(arch(17, 4), 3, 12);
    let bytes = encode_ensemble(&e);
    assert_eq!(decode_ensemble(&bytes).unwrap(), e);
    assert_eq!(encode_ensemble(&decode_ensemble(&bytes).unwrap()), bytes);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_ensemble(&bad).is_err());
    assert!(decode_ensemble(&bytes[..bytes.len() - 3]).is_err());
}
