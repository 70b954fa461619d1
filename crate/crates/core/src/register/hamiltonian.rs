use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use super::config::{CouplingMode, RegisterConfig};
use crate::constants::BOHR_MAGNETON_MHZ_PER_T;
use crate::error::Result;
use crate::linalg::CMatrix;

/// Drive channel: microwave couples to the electron, RF to the nuclei.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    Mw,
    Rf,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Mw, Channel::Rf];

    pub fn index(self) -> usize {
        match self {
            Channel::Mw => 0,
            Channel::Rf => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Mw => "MW",
            Channel::Rf => "RF",
        }
    }
}

/// Spin-½ operators `S_x, S_y, S_z` for every spin of the register,
/// embedded in the full product space (spin 0 is the most significant factor).
pub struct SpinOperators {
    ops: Vec<[CMatrix; 3]>,
}

impl SpinOperators {
    pub fn new(n_spins: usize) -> Self {
        let h = 0.5;
        let sx = CMatrix::from_rows(2, alloc::vec![C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(h, 0.0), C64::new(0.0, 0.0)]);
        let sy = CMatrix::from_rows(2, alloc::vec![C64::new(0.0, 0.0), C64::new(0.0, -h), C64::new(0.0, h), C64::new(0.0, 0.0)]);
        let sz = CMatrix::from_real_diag(&[h, -h]);
        let embed = |spin: usize, single: &CMatrix| {
            let mut acc = CMatrix::identity(1);
            for s in 0..n_spins {
                acc = if s == spin { acc.kron(single) } else { acc.kron(&CMatrix::identity(2)) };
            }
            acc
        };
        let ops = (0..n_spins).map(|s| [embed(s, &sx), embed(s, &sy), embed(s, &sz)]).collect();
        Self { ops }
    }

    pub fn x(&self, spin: usize) -> &CMatrix {
        &self.ops[spin][0]
    }

    pub fn y(&self, spin: usize) -> &CMatrix {
        &self.ops[spin][1]
    }

    pub fn z(&self, spin: usize) -> &CMatrix {
        &self.ops[spin][2]
    }

    pub fn axis(&self, spin: usize, axis: usize) -> &CMatrix {
        &self.ops[spin][axis]
    }
}

fn add_scaled(acc: &mut CMatrix, op: &CMatrix, s: f64) {
    if s == 0.0 {
        return;
    }
    let n = acc.dim();
    for i in 0..n {
        for j in 0..n {
            let v = op[(i, j)];
            if v.re != 0.0 || v.im != 0.0 {
                acc[(i, j)] += v * s;
            }
        }
    }
}

/// Static Hamiltonian in MHz:
/// `g μB B S_z − Σ γ_k B I_z^k + Σ S·A^k·I^k + J I_z^0 I_z^1`.
/// In secular mode only the `S_z` row of each tensor is kept.
pub fn build_hamiltonian(config: &RegisterConfig) -> Result<CMatrix> {
    config.validate()?;
    let n_spins = config.n_spins();
    let ops = SpinOperators::new(n_spins);
    let mut h = CMatrix::zeros(config.dim());

    add_scaled(&mut h, ops.z(0), config.g_electron * BOHR_MAGNETON_MHZ_PER_T * config.b_field_t);
    for (k, nucleus) in config.nuclei.iter().enumerate() {
        let spin = k + 1;
        add_scaled(&mut h, ops.z(spin), -nucleus.gyro_mhz_per_t * config.b_field_t);
        let rows: &[usize] = match config.mode {
            CouplingMode::Secular => &[2],
            CouplingMode::Full => &[0, 1, 2],
        };
        for &e_axis in rows {
            for n_axis in 0..3 {
                let a = nucleus.hyperfine.0[e_axis][n_axis];
                if a != 0.0 {
                    let term = ops.axis(0, e_axis) * ops.axis(spin, n_axis);
                    add_scaled(&mut h, &term, a);
                }
            }
        }
    }
    if config.j_coupling_khz != 0.0 {
        let term = ops.z(1) * ops.z(2);
        add_scaled(&mut h, &term, config.j_coupling_khz * 1e-3);
    }
    Ok(h)
}

/// Drive operator of a channel: `2 S_x` for MW, `Σ_k 2 I_x^k` for RF.
pub fn drive_operator(config: &RegisterConfig, channel: Channel) -> CMatrix {
    let ops = SpinOperators::new(config.n_spins());
    let mut d = CMatrix::zeros(config.dim());
    match channel {
        Channel::Mw => add_scaled(&mut d, ops.x(0), 2.0),
        Channel::Rf => {
            for spin in 1..config.n_spins() {
                add_scaled(&mut d, ops.x(spin), 2.0);
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::register::config::{HyperfineTensor, Nucleus, Species};

    #[test]
    fn zero_config_gives_zero_operator() {
        let cfg = RegisterConfig {
            b_field_t: 0.0,
            g_electron: 2.0,
            nuclei: alloc::vec![Nucleus::new(Species::Hydrogen, HyperfineTensor::axial(0.0, 0.0, 0.0))],
            j_coupling_khz: 0.0,
            mode: CouplingMode::Full,
        };
        let h = build_hamiltonian(&cfg).unwrap();
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn spin_commutation() {
        let ops = SpinOperators::new(2);
        let c = ops.x(1).commutator(ops.y(1));
        let expected = ops.z(1).scale(C64::new(0.0, 1.0));
        assert!((&c - &expected).max_abs() < 1e-15);
        assert!(ops.x(0).commutator(ops.y(1)).max_abs() < 1e-15);
    }
}
