//! The two parameterized circuit families.
//!
//! **Two-local** (`two_local(n, L)`): a rotation layer, then `L` repetitions
//! of `[entangle; rotate]`. A rotation layer is `RY(θ) RZ(θ')` on every qubit
//! in ascending order; the entangler is the chain `CNOT(i → i+1)` for
//! `i = 0..n-2`. Parameter count `2n(L+1)`.
//!
//! **Block** (`block_ansatz(n, L)`): a block on `(a, b)` is
//! `RY(a) RY(b) CNOT(a→b) RY(a) RY(b) CNOT(a→b)` with four fresh angles.
//! Each layer places blocks on `(0,1), (2,3), …` and then `(1,2), (3,4), …`.
//! Parameter count `4 (⌊n/2⌋ + ⌊(n-1)/2⌋) L`.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::statevector::{Gate, SimError};

#[derive(Debug, Error, PartialEq)]
pub enum AnsatzError {
    #[error("ansatz needs at least 2 qubits and 1 layer (got n={n}, layers={layers})")]
    InvalidSize { n: usize, layers: usize },
    #[error("parameter slot {0} is never used")]
    UnusedSlot(usize),
    #[error("parameter slot {slot} is out of range for {n_params} parameters")]
    SlotOutOfRange { slot: usize, n_params: usize },
    #[error(transparent)]
    Gate(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzFamily {
    #[default]
    TwoLocal,
    Block,
}

impl AnsatzFamily {
    pub fn build(self, n: usize, layers: usize) -> Result<Circuit, AnsatzError> {
        match self {
            AnsatzFamily::TwoLocal => two_local(n, layers),
            AnsatzFamily::Block => block_ansatz(n, layers),
        }
    }

    /// Layer counts used for the 12-qubit runs.
    pub fn default_layers(self) -> usize {
        match self {
            AnsatzFamily::TwoLocal => 3,
            AnsatzFamily::Block => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AnsatzFamily::TwoLocal => "two_local",
            AnsatzFamily::Block => "block",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Circuit {
    n_qubits: usize,
    n_params: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_params: usize, gates: Vec<Gate>) -> Result<Self, AnsatzError> {
        let mut used = vec![false; n_params];
        for g in &gates {
            g.check(n_qubits)?;
            if let Some(slot) = g.param_slot() {
                *used
                    .get_mut(slot)
                    .ok_or(AnsatzError::SlotOutOfRange { slot, n_params })? = true;
            }
        }
        if let Some(slot) = used.iter().position(|u| !u) {
            return Err(AnsatzError::UnusedSlot(slot));
        }
        Ok(Self {
            n_qubits,
            n_params,
            gates,
        })
    }

    pub fn empty(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            n_params: 0,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn cnot_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Cnot { .. }))
            .count()
    }

    /// JSON gate list: `{"n_qubits", "n_params", "gates": [{"gate": "ry", "qubit", "param"}, …]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    /// Text diagram, one wire per qubit (qubit 0 on top). Gates are packed
    /// greedily into the earliest column free on every wire they span.
    pub fn diagram(&self) -> String {
        let n = self.n_qubits;
        let mut columns: Vec<Vec<Option<String>>> = Vec::new();
        let mut frontier = vec![0usize; n];
        for g in &self.gates {
            let (lo, hi, cells): (usize, usize, Vec<(usize, String)>) = match *g {
                Gate::Ry { qubit, param } => (qubit, qubit, vec![(qubit, format!("RY[{param}]"))]),
                Gate::Rz { qubit, param } => (qubit, qubit, vec![(qubit, format!("RZ[{param}]"))]),
                Gate::Cnot { control, target } => (
                    control.min(target),
                    control.max(target),
                    vec![(control, "●".into()), (target, "X".into())],
                ),
            };
            let col = frontier[lo..=hi].iter().copied().max().unwrap_or(0);
            if col == columns.len() {
                columns.push(vec![None; n]);
            }
            for q in lo..=hi {
                columns[col][q] = Some("│".into());
                frontier[q] = col + 1;
            }
            for (q, label) in cells {
                columns[col][q] = Some(label);
            }
        }

        let mut out = String::new();
        let label_width = format!("q{}", n.saturating_sub(1)).len();
        for q in 0..n {
            write!(out, "{:>label_width$}: ─", format!("q{q}")).unwrap();
            for column in &columns {
                let width = column
                    .iter()
                    .flatten()
                    .map(|s| s.chars().count())
                    .max()
                    .unwrap_or(1);
                let cell = column[q].as_deref().unwrap_or("");
                let pad = width - cell.chars().count();
                let (left, right) = (pad / 2, pad - pad / 2);
                out.push_str(&"─".repeat(left));
                out.push_str(cell);
                out.push_str(&"─".repeat(right));
                out.push('─');
            }
            out.push('\n');
        }
        out
    }
}

struct Builder {
    gates: Vec<Gate>,
    next: usize,
}

impl Builder {
    fn new() -> Self {
        Self {
            gates: Vec::new(),
            next: 0,
        }
    }

    fn slot(&mut self) -> usize {
        self.next += 1;
        self.next - 1
    }

    fn ry(&mut self, qubit: usize) {
        let param = self.slot();
        self.gates.push(Gate::Ry { qubit, param });
    }

    fn rz(&mut self, qubit: usize) {
        let param = self.slot();
        self.gates.push(Gate::Rz { qubit, param });
    }

    fn cnot(&mut self, control: usize, target: usize) {
        self.gates.push(Gate::Cnot { control, target });
    }

    fn finish(self, n: usize) -> Result<Circuit, AnsatzError> {
        Circuit::new(n, self.next, self.gates)
    }
}

fn check_size(n: usize, layers: usize) -> Result<(), AnsatzError> {
    if n < 2 || layers < 1 {
        return Err(AnsatzError::InvalidSize { n, layers });
    }
    Ok(())
}

pub fn two_local(n: usize, layers: usize) -> Result<Circuit, AnsatzError> {
    check_size(n, layers)?;
    let mut b = Builder::new();
    let rotate = |b: &mut Builder| {
        for q in 0..n {
            b.ry(q);
            b.rz(q);
        }
    };
    rotate(&mut b);
    for _ in 0..layers {
        for q in 0..n - 1 {
            b.cnot(q, q + 1);
        }
        rotate(&mut b);
    }
    b.finish(n)
}

pub fn block_ansatz(n: usize, layers: usize) -> Result<Circuit, AnsatzError> {
    check_size(n, layers)?;
    let mut b = Builder::new();
    for _ in 0..layers {
        for start in [0, 1] {
            for a in (start..n - 1).step_by(2) {
                let t = a + 1;
                b.ry(a);
                b.ry(t);
                b.cnot(a, t);
                b.ry(a);
                b.ry(t);
                b.cnot(a, t);
            }
        }
    }
    b.finish(n)
}

pub fn param_count(c: &Circuit) -> usize {
    c.n_params()
}
