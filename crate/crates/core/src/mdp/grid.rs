use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LabeledMdp, Row};
use crate::error::{Error, Result};
use crate::scltl::Alphabet;

pub const GRID_ACTIONS: [&str; 4] = ["Up", "Down", "Left", "Right"];

/// `[x, y]`: column, then row, origin at the top-left corner.
pub type Cell = [usize; 2];

/// Grid-world layout.
///
/// Region keys become atoms `s<key>` when numeric, or the key itself
/// otherwise. Obstacles carry the atom `C`, which is always present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    /// Probability of reaching the intended cell.
    #[serde(default = "default_slip")]
    pub slip: f64,
    #[serde(default)]
    pub obstacles: Vec<Cell>,
    #[serde(default)]
    pub labels: BTreeMap<String, Vec<Cell>>,
    pub s0: Cell,
}

fn default_slip() -> f64 {
    0.7
}

impl GridWorldSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn state(&self, [x, y]: Cell) -> usize {
        y * self.width + x
    }

    pub fn cell(&self, s: usize) -> Cell {
        [s % self.width, s / self.width]
    }

    /// Region keys paired with their atom names, in atom order.
    pub fn region_atoms(&self) -> Vec<(String, String)> {
        let mut keys: Vec<&String> = self.labels.keys().collect();
        keys.sort_by_key(|k| (k.parse::<u64>().ok().unwrap_or(u64::MAX), k.to_string()));
        keys.into_iter()
            .map(|k| {
                let atom = if k.chars().all(|c| c.is_ascii_digit()) {
                    format!("s{k}")
                } else {
                    k.clone()
                };
                (k.clone(), atom)
            })
            .collect()
    }

    pub fn alphabet(&self) -> Result<Alphabet> {
        let mut atoms: Vec<String> = self.region_atoms().into_iter().map(|(_, a)| a).collect();
        atoms.push("C".into());
        Alphabet::new(atoms)
    }
}

/// Builds the grid MDP with slip dynamics.
///
/// Each action aims at one of the four neighbors; the intended cell gets
/// `slip` and the other three directions plus staying put get
/// `(1 - slip) / 4` each. Mass aimed outside the grid stays in place.
pub fn build_gridworld(spec: &GridWorldSpec) -> Result<LabeledMdp> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(Error::InvalidParameter(format!("degenerate grid {w}x{h}")));
    }
    if !(spec.slip > 0.0 && spec.slip <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "intended-move probability {} outside (0, 1]",
            spec.slip
        )));
    }
    let in_grid = |[x, y]: Cell| x < w && y < h;
    let check = |c: Cell, what: &str| {
        if in_grid(c) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{what} cell {c:?} outside the {w}x{h} grid"
            )))
        }
    };
    check(spec.s0, "initial")?;
    let ap = spec.alphabet()?;
    let mut labels = vec![0u32; w * h];
    for (i, (key, _)) in spec.region_atoms().iter().enumerate() {
        for &c in &spec.labels[key] {
            check(c, "labeled")?;
            labels[spec.state(c)] |= 1 << i;
        }
    }
    let c_bit = 1 << (ap.len() - 1);
    for &c in &spec.obstacles {
        check(c, "obstacle")?;
        labels[spec.state(c)] |= c_bit;
    }

    let slip_share = (1.0 - spec.slip) / 4.0;
    let mut trans = Vec::with_capacity(w * h);
    for s in 0..w * h {
        let [x, y] = spec.cell(s);
        // Up, Down, Left, Right, Stay; None when off-grid.
        let moves: [Option<usize>; 5] = [
            y.checked_sub(1).map(|y| spec.state([x, y])),
            (y + 1 < h).then(|| spec.state([x, y + 1])),
            x.checked_sub(1).map(|x| spec.state([x, y])),
            (x + 1 < w).then(|| spec.state([x + 1, y])),
            Some(s),
        ];
        let rows: Vec<Row> = (0..4)
            .map(|a| {
                let mut row: Row = Vec::new();
                for (d, m) in moves.iter().enumerate() {
                    let p = if d == a { spec.slip } else { slip_share };
                    if p == 0.0 {
                        continue;
                    }
                    let t = m.unwrap_or(s);
                    match row.iter_mut().find(|(u, _)| *u == t) {
                        Some(e) => e.1 += p,
                        None => row.push((t, p)),
                    }
                }
                row.sort_by_key(|&(t, _)| t);
                row
            })
            .collect();
        trans.push(rows);
    }
    LabeledMdp::new(
        ap,
        GRID_ACTIONS.iter().map(|a| a.to_string()).collect(),
        trans,
        vec![(spec.state(spec.s0), 1.0)],
        labels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(slip: f64) -> GridWorldSpec {
        GridWorldSpec {
            width: 6,
            height: 8,
            slip,
            obstacles: vec![[0, 1]],
            labels: BTreeMap::from([("2".into(), vec![[5, 7]]), ("10".into(), vec![[1, 1]])]),
            s0: [3, 3],
        }
    }

    fn prob(m: &LabeledMdp, s: usize, a: usize, t: usize) -> f64 {
        m.row(s, a).iter().find(|e| e.0 == t).map_or(0.0, |e| e.1)
    }

    #[test]
    fn interior_cell() {
        let g = spec(0.7);
        let m = build_gridworld(&g).unwrap();
        let s = g.state([2, 3]);
        let right = g.state([3, 3]);
        assert!((prob(&m, s, 3, right) - 0.7).abs() < 1e-12);
        for t in [g.state([2, 2]), g.state([2, 4]), g.state([1, 3]), s] {
            assert!((prob(&m, s, 3, t) - 0.075).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_into_wall() {
        let g = spec(0.7);
        let m = build_gridworld(&g).unwrap();
        let s = g.state([0, 0]);
        assert!((prob(&m, s, 0, s) - 0.85).abs() < 1e-12);
        assert!((prob(&m, s, 0, g.state([1, 0])) - 0.075).abs() < 1e-12);
        assert!((prob(&m, s, 0, g.state([0, 1])) - 0.075).abs() < 1e-12);
    }

    #[test]
    fn deterministic_moves() {
        let g = spec(1.0);
        let m = build_gridworld(&g).unwrap();
        let s = g.state([2, 3]);
        assert_eq!(m.row(s, 0), &[(g.state([2, 2]), 1.0)]);
    }

    #[test]
    fn labels_and_atoms() {
        let g = spec(0.7);
        let m = build_gridworld(&g).unwrap();
        assert_eq!(m.ap().atoms(), ["s2", "s10", "C"]);
        assert_eq!(m.label(g.state([5, 7])), 0b001);
        assert_eq!(m.label(g.state([1, 1])), 0b010);
        assert_eq!(m.label(g.state([0, 1])), 0b100);
        assert_eq!(m.mu0(), &[(g.state([3, 3]), 1.0)]);
    }

    #[test]
    fn degenerate_grid_rejected() {
        let mut g = spec(0.7);
        g.width = 0;
        assert!(build_gridworld(&g).is_err());
    }
}
