//! NAND circuits and key-homomorphic evaluation.
//!
//! Public side: input matrices A_i = A·R_i + b_i·G are folded gate by gate
//! with A_g = G - A_l·D(A_r), where D is the ternary gadget decomposition.
//! Secret side: R_g = -R_l·D(A_r) - b_l·R_r, so that the output matrix
//! equals A·R_C + C(b)·G.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::{IntMatrix, RingMatrix};
use crate::trapdoor::{gadget, gadget_decompose_matrix};

/// A single-output circuit of NAND gates.
///
/// Wires `0..inputs` carry the inputs; gate g drives wire `inputs + g`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NandCircuit {
    pub inputs: usize,
    pub gates: Vec<(usize, usize)>,
    pub output: usize,
}

impl NandCircuit {
    pub fn new(inputs: usize, gates: Vec<(usize, usize)>, output: usize) -> Result<Self> {
        let c = Self { inputs, gates, output };
        c.validate()?;
        Ok(c)
    }

    /// Checks topological order and the output wire.
    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 {
            return Err(Error::Circuit("a circuit needs at least one input".into()));
        }
        for (g, &(l, r)) in self.gates.iter().enumerate() {
            let limit = self.inputs + g;
            if l >= limit || r >= limit {
                return Err(Error::Circuit(format!(
                    "gate {g} reads wire {} which is not yet defined",
                    l.max(r)
                )));
            }
        }
        if self.output >= self.wire_count() {
            return Err(Error::Circuit(format!("output wire {} does not exist", self.output)));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: NandCircuit =
            serde_json::from_str(s).map_err(|e| Error::Circuit(format!("bad circuit JSON: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("circuit serializes")
    }

    pub fn wire_count(&self) -> usize {
        self.inputs + self.gates.len()
    }

    /// Longest input-to-output path, in gates.
    pub fn depth(&self) -> usize {
        let mut d = vec![0usize; self.wire_count()];
        for (g, &(l, r)) in self.gates.iter().enumerate() {
            d[self.inputs + g] = 1 + d[l].max(d[r]);
        }
        d[self.output]
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.inputs {
            return Err(Error::Circuit(format!(
                "circuit takes {} inputs, got {len}",
                self.inputs
            )));
        }
        Ok(())
    }

    /// Plain boolean evaluation.
    pub fn eval(&self, bits: &[bool]) -> Result<bool> {
        self.check_len(bits.len())?;
        let mut w = bits.to_vec();
        for &(l, r) in &self.gates {
            w.push(!(w[l] && w[r]));
        }
        Ok(w[self.output])
    }

    /// Wires that the output depends on.
    fn live_wires(&self) -> Vec<bool> {
        let mut live = vec![false; self.wire_count()];
        live[self.output] = true;
        for g in (0..self.gates.len()).rev() {
            if live[self.inputs + g] {
                let (l, r) = self.gates[g];
                live[l] = true;
                live[r] = true;
            }
        }
        live
    }
}

/// A keyed function evaluated as a NAND circuit on (key || message).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrfSpec {
    pub key_len: usize,
    pub msg_len: usize,
    pub circuit: NandCircuit,
    /// Set for the built-in toy circuit, which is NOT a secure PRF.
    pub toy: bool,
}

impl PrfSpec {
    pub fn new(key_len: usize, msg_len: usize, circuit: NandCircuit) -> Result<Self> {
        if circuit.inputs != key_len + msg_len {
            return Err(Error::Circuit(format!(
                "circuit has {} inputs, expected key {key_len} + message {msg_len}",
                circuit.inputs
            )));
        }
        circuit.validate()?;
        Ok(Self {
            key_len,
            msg_len,
            circuit,
            toy: false,
        })
    }

    /// Toy keyed circuit. NOT CRYPTOGRAPHIC.
    ///
    /// First layer: even key bits are NANDed with a message bit, odd key bits
    /// with their even neighbour. The layer is then reduced by a balanced
    /// NAND tree, for depth 1 + ceil(log2 key_len).
    pub fn toy(key_len: usize, msg_len: usize) -> Result<Self> {
        if key_len < 2 || msg_len == 0 {
            return Err(Error::Circuit("toy PRF needs key_len >= 2 and msg_len >= 1".into()));
        }
        let mut gates = Vec::new();
        let inputs = key_len + msg_len;
        let mut layer: Vec<usize> = (0..key_len)
            .map(|i| {
                let other = if i % 2 == 0 { key_len + (i / 2) % msg_len } else { i - 1 };
                gates.push((i, other));
                inputs + gates.len() - 1
            })
            .collect();
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len().div_ceil(2));
            for pair in layer.chunks(2) {
                if let [a, b] = pair {
                    gates.push((*a, *b));
                    next.push(inputs + gates.len() - 1);
                } else {
                    next.push(pair[0]);
                }
            }
            layer = next;
        }
        let circuit = NandCircuit::new(inputs, gates, layer[0])?;
        Ok(Self {
            key_len,
            msg_len,
            circuit,
            toy: true,
        })
    }

    pub fn input_len(&self) -> usize {
        self.key_len + self.msg_len
    }

    pub fn eval(&self, key: &[bool], msg: &[bool]) -> Result<bool> {
        if key.len() != self.key_len || msg.len() != self.msg_len {
            return Err(Error::Circuit(format!(
                "PRF expects a {}-bit key and {}-bit message",
                self.key_len, self.msg_len
            )));
        }
        let mut bits = key.to_vec();
        bits.extend_from_slice(msg);
        self.circuit.eval(&bits)
    }
}

/// Public evaluation: the matrix on the output wire.
pub fn eval_public(c: &NandCircuit, mats: &[RingMatrix]) -> Result<RingMatrix> {
    c.check_len(mats.len())?;
    let first = &mats[0];
    if mats.iter().any(|a| a.rows() != 1 || a.cols() != first.cols()) {
        return Err(Error::Shape("inputs must all be 1 x m".into()));
    }
    if c.output < c.inputs {
        return Ok(mats[c.output].clone());
    }
    let g = gadget(first.cols(), first.n(), first.modulus());
    let live = c.live_wires();
    let mut wires: Vec<Option<RingMatrix>> = mats.iter().cloned().map(Some).collect();
    let mut decomp: Vec<Option<IntMatrix>> = vec![None; c.wire_count()];
    for (gi, &(l, r)) in c.gates.iter().enumerate() {
        if !live[c.inputs + gi] {
            wires.push(None);
            continue;
        }
        if decomp[r].is_none() {
            decomp[r] = Some(gadget_decompose_matrix(wires[r].as_ref().expect("live wire"))?);
        }
        let prod = wires[l]
            .as_ref()
            .expect("live wire")
            .mul_int_matrix(decomp[r].as_ref().unwrap())?;
        wires.push(Some(g.sub(&prod)?));
    }
    Ok(wires[c.output].take().expect("output is live"))
}

/// Secret evaluation: (R_C, C(b)) with eval_public(mats) = A·R_C + C(b)·G,
/// given mats[i] = A·R_i + b_i·G.
pub fn eval_secret(
    c: &NandCircuit,
    mats: &[RingMatrix],
    r_mats: &[IntMatrix],
    bits: &[bool],
) -> Result<(IntMatrix, bool)> {
    c.check_len(mats.len())?;
    c.check_len(r_mats.len())?;
    c.check_len(bits.len())?;
    let first = &mats[0];
    let g = gadget(first.cols(), first.n(), first.modulus());
    let mut pub_w: Vec<RingMatrix> = mats.to_vec();
    let mut sec_w: Vec<IntMatrix> = r_mats.to_vec();
    let mut bit_w: Vec<bool> = bits.to_vec();
    for &(l, r) in &c.gates {
        let d = gadget_decompose_matrix(&pub_w[r])?;
        let mut rg = sec_w[l].mul(&d)?.neg();
        if bit_w[l] {
            rg = rg.add(&sec_w[r].neg())?;
        }
        pub_w.push(g.sub(&pub_w[l].mul_int_matrix(&d)?)?);
        sec_w.push(rg);
        bit_w.push(!(bit_w[l] && bit_w[r]));
    }
    Ok((sec_w.swap_remove(c.output), bit_w[c.output]))
}
