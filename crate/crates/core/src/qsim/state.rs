use num_complex::Complex64;
use std::io::{self, Write};

use super::QsimError;

/// Amplitudes must keep unit norm within this tolerance.
pub const NORM_TOL: f64 = 1e-10;

/// Dense normalized state of `num_qubits` qubits; qubit 0 is the least
/// significant bit of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

fn gather_index(idx: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |a, (j, &q)| a | (((idx >> q) & 1) << j))
}

/// Drops the bits at `sorted` positions and packs the rest downwards.
fn compress_index(idx: usize, sorted: &[usize]) -> usize {
    let mut out = 0;
    let mut shift = 0;
    let mut s = 0;
    let mut bit = 0;
    let mut rest = idx;
    while rest != 0 {
        if s < sorted.len() && sorted[s] == bit {
            s += 1;
        } else {
            out |= (rest & 1) << shift;
            shift += 1;
        }
        rest >>= 1;
        bit += 1;
    }
    out
}

impl Statevector {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { num_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, QsimError> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(QsimError::BadLength(len));
        }
        let s = Self {
            num_qubits: len.trailing_zeros() as usize,
            amps,
        };
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QsimError::NotNormalized(norm));
        }
        Ok(s)
    }

    /// Like [`Statevector::from_amplitudes`] but rescales to unit norm.
    pub fn normalized(amps: Vec<Complex64>) -> Result<Self, QsimError> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm <= f64::EPSILON {
            return Err(QsimError::NotNormalized(norm));
        }
        Self::from_amplitudes(amps.into_iter().map(|a| a / norm).collect())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn check_qubit(&self, q: usize) -> Result<(), QsimError> {
        if q >= self.num_qubits {
            Err(QsimError::QubitOutOfRange {
                qubit: q,
                num_qubits: self.num_qubits,
            })
        } else {
            Ok(())
        }
    }

    fn check_distinct(&self, qubits: &[usize]) -> Result<(), QsimError> {
        for (i, &q) in qubits.iter().enumerate() {
            self.check_qubit(q)?;
            if qubits[..i].contains(&q) {
                return Err(QsimError::RepeatedQubit(q));
            }
        }
        Ok(())
    }

    /// `self ⊗ other` with `other`'s qubits placed above `self`'s.
    pub fn tensor(&self, other: &Statevector) -> Statevector {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for hi in &other.amps {
            for lo in &self.amps {
                amps.push(lo * hi);
            }
        }
        Statevector {
            num_qubits: self.num_qubits + other.num_qubits,
            amps,
        }
    }

    pub fn apply_cz(&mut self, i: usize, j: usize) -> Result<(), QsimError> {
        self.check_distinct(&[i, j])?;
        let mask = (1 << i) | (1 << j);
        for (idx, a) in self.amps.iter_mut().enumerate() {
            if idx & mask == mask {
                *a = -*a;
            }
        }
        Ok(())
    }

    pub fn apply_x(&mut self, q: usize) -> Result<(), QsimError> {
        self.check_qubit(q)?;
        let bit = 1 << q;
        for idx in 0..self.amps.len() {
            if idx & bit == 0 {
                self.amps.swap(idx, idx | bit);
            }
        }
        Ok(())
    }

    pub fn apply_z(&mut self, q: usize) -> Result<(), QsimError> {
        self.check_qubit(q)?;
        let bit = 1 << q;
        for (idx, a) in self.amps.iter_mut().enumerate() {
            if idx & bit != 0 {
                *a = -*a;
            }
        }
        Ok(())
    }

    /// Reorders qubits so that new qubit `q` is old qubit `order[q]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Statevector, QsimError> {
        if order.len() != self.num_qubits {
            return Err(QsimError::DimensionMismatch(order.len(), self.num_qubits));
        }
        self.check_distinct(order)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (idx, &a) in self.amps.iter().enumerate() {
            amps[gather_index(idx, order)] = a;
        }
        Ok(Statevector {
            num_qubits: self.num_qubits,
            amps,
        })
    }

    /// Applies `⟨bra|` to the listed qubits (bit `j` of the bra index is
    /// `qubits[j]`) and returns the unnormalized amplitudes of the rest.
    pub(crate) fn contract(
        &self,
        qubits: &[usize],
        bra: &[Complex64],
    ) -> Result<Vec<Complex64>, QsimError> {
        self.check_distinct(qubits)?;
        if bra.len() != 1 << qubits.len() {
            return Err(QsimError::DimensionMismatch(bra.len(), 1 << qubits.len()));
        }
        let mut sorted = qubits.to_vec();
        sorted.sort_unstable();
        let mut out = vec![Complex64::new(0.0, 0.0); 1 << (self.num_qubits - qubits.len())];
        for (idx, &a) in self.amps.iter().enumerate() {
            let sub = gather_index(idx, qubits);
            out[compress_index(idx, &sorted)] += bra[sub].conj() * a;
        }
        Ok(out)
    }

    /// Inverse of [`Statevector::contract`]: rebuilds a state in which the
    /// listed qubits are in `ket` and the rest are `self`.
    pub(crate) fn embed(
        &self,
        qubits: &[usize],
        ket: &[Complex64],
    ) -> Result<Statevector, QsimError> {
        let n = self.num_qubits + qubits.len();
        let mut sorted = qubits.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.last().is_some_and(|&q| q >= n) {
            return Err(QsimError::QubitOutOfRange {
                qubit: *sorted.last().unwrap_or(&0),
                num_qubits: n,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (idx, a) in amps.iter_mut().enumerate() {
            *a = ket[gather_index(idx, qubits)] * self.amps[compress_index(idx, &sorted)];
        }
        Ok(Statevector {
            num_qubits: n,
            amps,
        })
    }

    /// Traces out qubits that are in a pure product state with the rest.
    ///
    /// Fails with [`QsimError::NotProduct`] if the listed qubits are entangled
    /// with the remaining ones (beyond `tol` in L2 norm).
    pub fn remove_qubits(&self, qubits: &[usize], tol: f64) -> Result<Statevector, QsimError> {
        self.check_distinct(qubits)?;
        if qubits.len() == self.num_qubits {
            return Err(QsimError::EmptyState);
        }
        let mut sorted = qubits.to_vec();
        sorted.sort_unstable();
        // the largest column of the (sub, rest) matrix is the subsystem state
        let best = self
            .amps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .map(|(i, _)| compress_index(i, &sorted))
            .unwrap_or(0);
        let mut sub = vec![Complex64::new(0.0, 0.0); 1 << qubits.len()];
        for (idx, &a) in self.amps.iter().enumerate() {
            if compress_index(idx, &sorted) == best {
                sub[gather_index(idx, qubits)] = a;
            }
        }
        let sub_norm = sub.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        sub.iter_mut().for_each(|a| *a /= sub_norm);
        let rest = Statevector::normalized(self.contract(qubits, &sub)?)?;
        let rebuilt = rest.embed(qubits, &sub)?;
        if !super::equal_up_to_phase(self, &rebuilt, tol)? {
            return Err(QsimError::NotProduct);
        }
        Ok(rest)
    }

    /// Writes one line per basis state: `index real imag`, 17 significant digits.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, a) in self.amps.iter().enumerate() {
            writeln!(w, "{} {:.16e} {:.16e}", i, a.re, a.im)?;
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        let mut buf = Vec::new();
        self.write_dump(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("dump is ascii")
    }
}
