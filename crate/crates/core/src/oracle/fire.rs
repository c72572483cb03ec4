//! Fast inertial relaxation engine (FIRE) over atomic positions at fixed cell.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::morse::MorseModel;
use crate::chem::Structure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxSpec {
    pub max_steps: usize,
    /// convergence threshold on the largest per-atom force, eV/Å
    pub fmax: f64,
    pub dt_initial: f64,
    pub dt_max: f64,
    pub alpha_start: f64,
    pub f_inc: f64,
    pub f_dec: f64,
    /// factor applied to alpha after each accelerating step
    pub f_alpha: f64,
    /// downhill steps required before the time step may grow
    pub n_min: usize,
    /// largest allowed displacement norm per step, Å
    pub max_move: f64,
}

impl Default for RelaxSpec {
    fn default() -> Self {
        RelaxSpec {
            max_steps: 500,
            fmax: 0.02,
            dt_initial: 0.1,
            dt_max: 1.0,
            alpha_start: 0.1,
            f_inc: 1.1,
            f_dec: 0.5,
            f_alpha: 0.99,
            n_min: 5,
            max_move: 0.2,
        }
    }
}

impl RelaxSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fmax > 0.0) {
            return Err("fmax must be positive".into());
        }
        if !(self.dt_initial > 0.0 && self.dt_initial <= self.dt_max) {
            return Err("need 0 < dt_initial <= dt_max".into());
        }
        if !(self.f_dec > 0.0 && self.f_dec < 1.0 && self.f_inc >= 1.0) {
            return Err("need 0 < f_dec < 1 <= f_inc".into());
        }
        if !(self.max_move > 0.0) {
            return Err("max_move must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Relaxation {
    pub structure: Structure,
    /// total energy of `structure`, eV
    pub energy: f64,
    pub initial_energy: f64,
    pub steps_used: usize,
    pub converged: bool,
}

const SKIN: f64 = 1.0;

fn max_force(forces: &[Vector3<f64>]) -> f64 {
    forces.iter().map(|f| f.norm()).fold(0.0, f64::max)
}

fn all_finite(energy: f64, forces: &[Vector3<f64>]) -> bool {
    energy.is_finite() && forces.iter().all(|f| f.iter().all(|x| x.is_finite()))
}

fn dot(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm(a: &[Vector3<f64>]) -> f64 {
    dot(a, a).sqrt()
}

/// Relaxes atomic positions with FIRE until the largest force drops below `spec.fmax` or
/// `spec.max_steps` updates have been taken.
///
/// The returned energy never exceeds the starting energy: a run that ends uphill (or
/// hits a non-finite state) reports the lowest-energy configuration it visited.
pub fn relax(model: &MorseModel, s: &Structure, spec: &RelaxSpec) -> Relaxation {
    let mut x = s.cartesian_coords();
    let mut list = model.neighbor_list(s, &x, SKIN);
    let (mut energy, mut forces) = model.evaluate(&list, &x);
    let initial_energy = energy;

    if !all_finite(energy, &forces) {
        return Relaxation {
            structure: s.clone(),
            energy,
            initial_energy,
            steps_used: 0,
            converged: false,
        };
    }

    let mut best = (energy, x.clone());
    let mut v = vec![Vector3::zeros(); x.len()];
    let mut dt = spec.dt_initial;
    let mut alpha = spec.alpha_start;
    let mut downhill = 0usize;
    let mut steps = 0usize;
    let mut converged = false;
    let mut aborted = false;

    loop {
        if max_force(&forces) < spec.fmax {
            converged = true;
            break;
        }
        if steps >= spec.max_steps {
            break;
        }

        let power = dot(&forces, &v);
        if power > 0.0 {
            let scale = alpha * norm(&v) / norm(&forces).max(f64::MIN_POSITIVE);
            for (vi, fi) in v.iter_mut().zip(&forces) {
                *vi = *vi * (1.0 - alpha) + fi * scale;
            }
            if downhill > spec.n_min {
                dt = (dt * spec.f_inc).min(spec.dt_max);
                alpha *= spec.f_alpha;
            }
            downhill += 1;
        } else {
            v.iter_mut().for_each(|vi| *vi = Vector3::zeros());
            alpha = spec.alpha_start;
            dt *= spec.f_dec;
            downhill = 0;
        }

        for (vi, fi) in v.iter_mut().zip(&forces) {
            *vi += fi * dt;
        }
        let mut dr: Vec<Vector3<f64>> = v.iter().map(|vi| vi * dt).collect();
        let step = norm(&dr);
        if step > spec.max_move {
            let k = spec.max_move / step;
            dr.iter_mut().for_each(|d| *d *= k);
        }
        let trial: Vec<_> = x.iter().zip(&dr).map(|(a, d)| a + d).collect();
        if !list.is_valid_for(&trial) {
            list = model.neighbor_list(s, &trial, SKIN);
        }
        let (e, f) = model.evaluate(&list, &trial);
        steps += 1;
        if !all_finite(e, &f) {
            aborted = true;
            break;
        }
        x = trial;
        energy = e;
        forces = f;
        if energy < best.0 {
            best = (energy, x.clone());
        }
    }

    let converged = converged && !aborted;
    let (energy, positions) = if converged && energy <= initial_energy {
        (energy, x)
    } else {
        best
    };
    let structure = Structure::from_cartesian(s.lattice().clone(), s.species().to_vec(), &positions)
        .expect("relaxed positions are finite");
    Relaxation {
        structure,
        energy,
        initial_energy,
        steps_used: steps,
        converged,
    }
}
