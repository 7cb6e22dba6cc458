//! Trajectory simulation and CSV interchange.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::psd_sqrt;

use super::{compose_f, compose_h, ClgModel};

/// A simulated state/measurement record: `states[l]` and `measurements[l]`
/// hold the true state and the observation of recursion `l+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
    /// Seed the trajectory was generated from; 0 for imported trajectories.
    pub seed: u64,
}

fn draw_noise<R: Rng + ?Sized>(factor: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(factor.ncols(), |_, _| rng.sample(StandardNormal));
    factor * z
}

/// Samples a trajectory of `t_steps` states and measurements by forward
/// simulation. The initial state is drawn from the model's initial pdf, then
/// measurement and process noises are drawn independently each step, in that
/// order. Bit-reproducible for a given seed.
pub fn simulate<M: ClgModel + ?Sized>(model: &M, t_steps: usize, seed: u64) -> Result<Trajectory> {
    if t_steps == 0 {
        return Err(Error::InvalidParams(
            "t_steps must be at least 1".to_string(),
        ));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let e_factor = psd_sqrt(&model.cov_e(), "simulate cov_e")?;
    let wl_factor = psd_sqrt(&model.cov_w_lin(), "simulate cov_w_lin")?;
    let wn_factor = psd_sqrt(&model.cov_w_non(), "simulate cov_w_non")?;
    let dims = model.dims();

    let mut states = Vec::with_capacity(t_steps);
    let mut measurements = Vec::with_capacity(t_steps);
    let mut x = model.init().sample(&mut rng)?;
    for l in 1..=t_steps {
        let y = compose_h(model, l, &x)? + draw_noise(&e_factor, &mut rng);
        states.push(x.clone());
        measurements.push(y);
        if l < t_steps {
            let mut next = compose_f(model, l, &x)?;
            let mut lin = next.rows_mut(0, dims.d_l);
            lin += draw_noise(&wl_factor, &mut rng);
            let mut non = next.rows_mut(dims.d_l, dims.d_n);
            non += draw_noise(&wn_factor, &mut rng);
            x = next;
        }
    }
    Ok(Trajectory {
        states,
        measurements,
        seed,
    })
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Writes the trajectory as CSV with columns
    /// `l, x_0..x_{D-1}, y_0..y_{P-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io_err = |e: csv::Error| Error::InvalidParams(format!("csv write: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let d = self.states.first().map_or(0, |s| s.len());
        let p = self.measurements.first().map_or(0, |m| m.len());
        let mut header = vec!["l".to_string()];
        header.extend((0..d).map(|i| format!("x_{i}")));
        header.extend((0..p).map(|i| format!("y_{i}")));
        w.write_record(&header).map_err(io_err)?;
        for (i, (x, y)) in self.states.iter().zip(&self.measurements).enumerate() {
            let mut rec = vec![(i + 1).to_string()];
            rec.extend(x.iter().map(|v| format!("{v}")));
            rec.extend(y.iter().map(|v| format!("{v}")));
            w.write_record(&rec).map_err(io_err)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidParams(format!("csv flush: {e}")))?;
        Ok(())
    }

    /// Reads a trajectory written by [`Trajectory::write_csv`]. The state and
    /// measurement dimensions are recovered from the header; the seed is
    /// unknown for imported data and set to 0.
    pub fn read_csv<R: Read>(input: R) -> Result<Trajectory> {
        let parse_err = |msg: String| Error::InvalidParams(format!("csv read: {msg}"));
        let mut r = csv::Reader::from_reader(input);
        let header = r
            .headers()
            .map_err(|e| parse_err(e.to_string()))?
            .clone();
        let d = header.iter().filter(|h| h.starts_with("x_")).count();
        let p = header.iter().filter(|h| h.starts_with("y_")).count();
        if d == 0 || p == 0 {
            return Err(parse_err("missing x_/y_ columns".to_string()));
        }
        let mut states = Vec::new();
        let mut measurements = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| parse_err(e.to_string()))?;
            if rec.len() != 1 + d + p {
                return Err(parse_err(format!(
                    "row has {} fields, expected {}",
                    rec.len(),
                    1 + d + p
                )));
            }
            let nums: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|f| f.parse::<f64>().map_err(|e| parse_err(e.to_string())))
                .collect::<Result<_>>()?;
            states.push(DVector::from_vec(nums[..d].to_vec()));
            measurements.push(DVector::from_vec(nums[d..].to_vec()));
        }
        Ok(Trajectory {
            states,
            measurements,
            seed: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::agent::{agent_model, AgentParams};
    use crate::ssm::test_models::LinearModel;
    use approx::assert_relative_eq;

    #[test]
    fn deterministic_when_noise_free() {
        let mut model = LinearModel::default_stable();
        model.c_l = DMatrix::zeros(2, 2);
        model.c_n = DMatrix::zeros(2, 2);
        model.c_e = DMatrix::zeros(2, 2);
        let traj = simulate(&model, 20, 9).unwrap();
        for l in 0..traj.len() - 1 {
            let expected = compose_f(&model, l + 1, &traj.states[l]).unwrap();
            assert_relative_eq!(traj.states[l + 1], expected, epsilon = 1e-14);
            let y = compose_h(&model, l + 1, &traj.states[l]).unwrap();
            assert_relative_eq!(traj.measurements[l], y, epsilon = 1e-14);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let model = agent_model(AgentParams::paper()).unwrap();
        let a = simulate(&model, 50, 1234).unwrap();
        let b = simulate(&model, 50, 1234).unwrap();
        assert_eq!(a, b);
        let c = simulate(&model, 50, 1235).unwrap();
        assert_ne!(a, c);
    }

    /// The restoring force keeps benchmark trajectories bounded.
    #[test]
    fn benchmark_trajectories_stay_bounded() {
        let model = agent_model(AgentParams::paper()).unwrap();
        for seed in 0..20 {
            let traj = simulate(&model, 300, seed).unwrap();
            let max_pos = traj
                .states
                .iter()
                .map(|x| x.rows(0, 2).norm())
                .fold(0.0, f64::max);
            assert!(max_pos < 100.0, "seed {seed}: max |p| = {max_pos}");
        }
    }

    /// Stepping through the CLG slots and through the raw velocity/position
    /// equations with shared noise draws must agree; this pins the slot
    /// algebra of the agent model.
    #[test]
    fn slot_algebra_matches_raw_equations() {
        let params = AgentParams::paper();
        let model = agent_model(params.clone()).unwrap();
        let mut rng = StdRng::seed_from_u64(77);
        let mut x = DVector::from_vec(vec![5.0, 8.0, 4.0, 4.0]);
        for l in 1..=100 {
            let n_p = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal))
                * params.sigma_p;
            let n_v = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));

            // Route 1: CLG slots.
            let mut via_slots = compose_f(&model, l, &x).unwrap();
            {
                let mut lin = via_slots.rows_mut(0, 2);
                lin += &n_p;
                let mut non = via_slots.rows_mut(2, 2);
                non += &n_v * (1.0 - params.rho);
            }

            // Route 2: the raw dynamics.
            let p = x.rows(0, 2).into_owned();
            let v = x.rows(2, 2).into_owned();
            let speed = v.norm();
            let accel = -&p * (params.a0 / params.d0)
                - (&v / speed) * params.a0_tilde * (speed / params.v0).powi(3);
            let v_next = &v * params.rho + &n_v * (1.0 - params.rho) + &accel * params.t_s;
            let p_next =
                &p + &v * params.t_s + &accel * (0.5 * params.t_s * params.t_s) + &n_p;

            assert_relative_eq!(via_slots[0], p_next[0], epsilon = 1e-12);
            assert_relative_eq!(via_slots[1], p_next[1], epsilon = 1e-12);
            assert_relative_eq!(via_slots[2], v_next[0], epsilon = 1e-12);
            assert_relative_eq!(via_slots[3], v_next[1], epsilon = 1e-12);
            x = via_slots;
        }
    }

    #[test]
    fn csv_round_trip() {
        let model = agent_model(AgentParams::paper()).unwrap();
        let traj = simulate(&model, 10, 3).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("l,x_0,x_1,x_2,x_3,y_0,y_1,y_2"));
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), traj.len());
        for l in 0..traj.len() {
            assert_relative_eq!(back.states[l], traj.states[l]);
            assert_relative_eq!(back.measurements[l], traj.measurements[l]);
        }
    }
}
