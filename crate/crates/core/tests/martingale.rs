use ewpitman::martingale::{
    conditional_variance_with, hall_heyde_ln, increment_power_majorant, simulate_paths, y_path, MartingaleSample,
};
use ewpitman::model::gcrp_sample;
use ewpitman::{Exec, ScalingParams};

#[test]
fn terminal_y_has_unit_mean() {
    let s = ScalingParams::new(0.5, 1.0).unwrap();
    let ys = simulate_paths(Exec::default(), &s, 500, 20_000, 5, |p, _| p.terminal()).unwrap();
    let m = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / m;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (m - 1.0);
    assert!((mean - 1.0).abs() < 4.0 * (var / m).sqrt(), "{mean}");
}

#[test]
fn conditional_variance_averages_to_one() {
    let s = ScalingParams::new(0.5, 1.0).unwrap();
    let n = 2000;
    let v2 = simulate_paths(Exec::default(), &s, n, 2000, 6, |p, psi| conditional_variance_with(p, psi).unwrap().v2)
        .unwrap();
    let mean = v2.iter().sum::<f64>() / v2.len() as f64;
    assert!((mean - 1.0).abs() < 0.02, "{mean}");
    assert!(v2.iter().all(|&v| v >= 0.0));
}

#[test]
fn zero_discount_has_no_martingale_path() {
    let s = ScalingParams::new(0.0, 1.0).unwrap();
    let traj = gcrp_sample(&s.at(10), 10, 1).unwrap();
    assert!(matches!(y_path(&traj, &s), Err(ewpitman::Error::UnsupportedRegime(_))));
}

#[test]
fn mismatched_theta_is_rejected() {
    let s = ScalingParams::new(0.5, 1.0).unwrap();
    let traj = gcrp_sample(&s.at(20), 10, 1).unwrap();
    assert!(matches!(y_path(&traj, &s), Err(ewpitman::Error::Contract(_))));
}

#[test]
fn hall_heyde_hand_examples() {
    let zero = MartingaleSample { increments: vec![0.0; 5], v2: 0.0 };
    assert_eq!(hall_heyde_ln(&[zero], 1.0).unwrap().value(), 1.0);
    let unit = MartingaleSample { increments: vec![0.5, -0.5], v2: 1.0 };
    let hh = hall_heyde_ln(&[unit], 1.0).unwrap();
    assert!((hh.value() - 0.125).abs() < 1e-15);
    assert!(hall_heyde_ln(&[], 1.0).is_err());
}

#[test]
fn increment_term_stays_under_its_majorant() {
    let s = ScalingParams::new(0.5, 1.0).unwrap();
    let n = 1000;
    let sigma = ewpitman::asymptotics::constants(&s).sigma2.unwrap().sqrt();
    let sums = simulate_paths(Exec::default(), &s, n, 200, 3, |p, _| {
        p.standardized_increments(sigma).iter().map(|x| x.powi(4)).sum::<f64>()
    })
    .unwrap();
    let majorant = increment_power_majorant(&s, n, 1.0).unwrap().majorant;
    assert!(sums.iter().all(|&x| x <= majorant));
}
