use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::SeedableRng;
use turbo_filter::filters::{pf_first_mu, pmc_pf, pmg_ekf, pmg_pf, Mpf, TurboFilter, TfOptions, TfVariant, Ekf};
use turbo_filter::gaussian::GaussianMoment;
use turbo_filter::ssm::{agent_model, simulate, AgentParams};

fn main() {
    let model = agent_model(AgentParams::paper()).unwrap();
    let mut rng = StdRng::seed_from_u64(1);
    let n_p = 100usize;
    let reps = 3000usize;
    let points: Vec<DVector<f64>> = (0..n_p).map(|i| DVector::from_vec(vec![0.5 + 0.01 * i as f64, -0.3])).collect();
    let fe_l = GaussianMoment::new(
        DVector::from_vec(vec![0.4, 0.6]),
        DMatrix::from_row_slice(2, 2, &[2.4e-3, 1e-4, 1e-4, 2.1e-3]),
    ).unwrap();
    let fe_l2 = GaussianMoment::new(
        DVector::from_vec(vec![0.41, 0.59]),
        DMatrix::from_row_slice(2, 2, &[2.2e-3, 9e-5, 9e-5, 2.0e-3]),
    ).unwrap();
    let y = DVector::from_vec(vec![0.42, 0.58, 0.6]);

    let t0 = Instant::now();
    for _ in 0..reps { let _ = pf_first_mu(&points, &model, 1, &y, &fe_l, false).unwrap(); }
    println!("pf_first_mu : {:>8.1} us/call", t0.elapsed().as_secs_f64() * 1e6 / reps as f64);

    let t0 = Instant::now();
    for _ in 0..reps { let _ = pmg_ekf(&points, &model, 1, &fe_l, &fe_l2, false).unwrap(); }
    println!("pmg_ekf     : {:>8.1} us/call", t0.elapsed().as_secs_f64() * 1e6 / reps as f64);

    let t0 = Instant::now();
    let mut out = None;
    for _ in 0..reps { out = Some(pmg_pf(&points, &model, 1, &fe_l, &mut rng).unwrap()); }
    println!("pmg_pf      : {:>8.1} us/call", t0.elapsed().as_secs_f64() * 1e6 / reps as f64);
    let out = out.unwrap();

    let t0 = Instant::now();
    for _ in 0..reps { let _ = pmc_pf(&out.pm_gaussians, &out.predicted).unwrap(); }
    println!("pmc_pf      : {:>8.1} us/call", t0.elapsed().as_secs_f64() * 1e6 / reps as f64);

    // whole steps
    let traj = simulate(&model, 300, 5).unwrap();
    for variant in [TfVariant::Tf1, TfVariant::Tf2] {
        let mut rng = StdRng::seed_from_u64(2);
        let mut tf = TurboFilter::new(&model, variant, TfOptions::default(), n_p, &mut rng).unwrap();
        let t0 = Instant::now();
        for rep in 0..10 {
            let _ = rep;
            let mut tf2 = tf.clone();
            for (i, yy) in traj.measurements.iter().enumerate() {
                tf2.step(&model, i + 1, yy, &mut rng).unwrap();
            }
        }
        println!("{:?} full run: {:>8.1} ms", variant, t0.elapsed().as_secs_f64() * 1e3 / 10.0);
        let _ = tf;
    }
    let mut rng = StdRng::seed_from_u64(2);
    let mpf = Mpf::new(&model, n_p, &mut rng).unwrap();
    let t0 = Instant::now();
    for _ in 0..10 {
        let mut m2 = mpf.clone();
        for (i, yy) in traj.measurements.iter().enumerate() { m2.step(&model, i + 1, yy, &mut rng).unwrap(); }
    }
    println!("Mpf full run: {:>8.1} ms", t0.elapsed().as_secs_f64() * 1e3 / 10.0);
    let mut ekf = Ekf::new(&model);
    let t0 = Instant::now();
    for _ in 0..10 { let mut e2 = ekf.clone(); for (i, yy) in traj.measurements.iter().enumerate() { e2.step(&model, i + 1, yy).unwrap(); } }
    println!("Ekf full run: {:>8.1} ms", t0.elapsed().as_secs_f64() * 1e3 / 10.0);
    let _ = &mut ekf;
}
