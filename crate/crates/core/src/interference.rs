//! GAA pairwise interference and co-channel feasibility.
//!
//! Interference is channel independent: the same `R` applies to every channel.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AllocationState, Cbsd, CbsdId, ChannelId, Tier};

/// How a joining GAA is checked against a channel's current occupants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeasibilityMode {
    /// Only the joining GAA's received interference is bounded by `gamma`.
    #[default]
    Literal,
    /// The joining GAA and every co-channel GAA must stay within `gamma`.
    Mutual,
}

impl FeasibilityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeasibilityMode::Literal => "literal",
            FeasibilityMode::Mutual => "mutual",
        }
    }
}

impl std::str::FromStr for FeasibilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(FeasibilityMode::Literal),
            "mutual" => Ok(FeasibilityMode::Mutual),
            other => Err(Error::Config(format!(
                "unknown feasibility mode `{other}` (expected literal or mutual)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PropagationModel {
    /// `R` is supplied verbatim.
    Direct,
    /// `tx_power * max(d, min_distance)^-exponent`.
    PowerLaw {
        tx_power: f64,
        exponent: f64,
        min_distance: f64,
    },
}

impl PropagationModel {
    pub fn validate(&self) -> Result<()> {
        if let PropagationModel::PowerLaw {
            tx_power,
            exponent,
            min_distance,
        } = *self
        {
            let positive = |v: f64| v.is_finite() && v > 0.0;
            if !positive(tx_power) || !positive(exponent) || !positive(min_distance) {
                return Err(Error::Config(format!(
                    "power-law parameters must be positive (tx_power={tx_power}, \
                     exponent={exponent}, min_distance={min_distance})"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetric pairwise GAA interference `R` with zero diagonal, plus the
/// co-channel threshold `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceMatrix {
    ids: Vec<CbsdId>,
    index: HashMap<CbsdId, usize>,
    values: Vec<f64>,
    gamma: f64,
}

impl InterferenceMatrix {
    /// Builds from a dense row-major matrix whose rows follow `ids`.
    pub fn from_dense(ids: Vec<CbsdId>, values: Vec<f64>, gamma: f64) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(Error::Config(format!(
                "interference matrix has {} entries, expected {n}x{n}",
                values.len()
            )));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::Config(format!(
                "gamma must be a non-negative number, got {gamma}"
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::Config(format!(
                    "interference matrix diagonal r[{i}][{i}] must be 0, got {}",
                    values[i * n + i]
                )));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Config(format!(
                        "interference r[{i}][{j}] must be a non-negative number, got {v}"
                    )));
                }
                if v != values[j * n + i] {
                    return Err(Error::Config(format!(
                        "interference matrix is asymmetric: r[{i}][{j}]={v} but r[{j}][{i}]={}",
                        values[j * n + i]
                    )));
                }
            }
        }
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(*id, i).is_some() {
                return Err(Error::Config(format!(
                    "duplicate CBSD {id} in interference matrix"
                )));
            }
        }
        Ok(InterferenceMatrix {
            ids,
            index,
            values,
            gamma,
        })
    }

    pub fn empty(gamma: f64) -> Result<Self> {
        InterferenceMatrix::from_dense(Vec::new(), Vec::new(), gamma)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::Config(format!(
                "gamma must be a non-negative number, got {gamma}"
            )));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn ids(&self) -> &[CbsdId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, k: CbsdId) -> bool {
        self.index.contains_key(&k)
    }

    pub fn get(&self, a: CbsdId, b: CbsdId) -> Result<f64> {
        let lookup = |k: CbsdId| {
            self.index.get(&k).copied().ok_or_else(|| {
                Error::Config(format!("GAA {k} has no row in the interference matrix"))
            })
        };
        let (i, j) = (lookup(a)?, lookup(b)?);
        Ok(self.values[i * self.ids.len() + j])
    }

    /// Row-major copy of the dense matrix.
    pub fn dense(&self) -> &[f64] {
        &self.values
    }
}

/// Builds `R` over `gaas` (rows in the given order) from their positions.
pub fn build_interference_matrix(
    gaas: &[Cbsd],
    model: PropagationModel,
    gamma: f64,
) -> Result<InterferenceMatrix> {
    model.validate()?;
    let PropagationModel::PowerLaw {
        tx_power,
        exponent,
        min_distance,
    } = model
    else {
        return Err(Error::Config(
            "direct interference matrices are supplied verbatim, not built".into(),
        ));
    };
    let positions = gaas
        .iter()
        .map(|g| {
            if g.tier != Tier::Gaa {
                return Err(Error::NotAGaa(g.id));
            }
            g.position.ok_or_else(|| {
                Error::Config(format!("GAA {} needs a position for power-law propagation", g.id))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = gaas.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = positions[i].distance(&positions[j]).max(min_distance);
            let r = tx_power * d.powf(-exponent);
            values[i * n + j] = r;
            values[j * n + i] = r;
        }
    }
    InterferenceMatrix::from_dense(gaas.iter().map(|g| g.id).collect(), values, gamma)
}

fn require_gaa(state: &AllocationState, k: CbsdId) -> Result<()> {
    match state.tier_of(k)? {
        Tier::Gaa => Ok(()),
        Tier::Pal => Err(Error::NotAGaa(k)),
    }
}

fn interference_on(
    state: &AllocationState,
    k: CbsdId,
    s: ChannelId,
    r: &InterferenceMatrix,
) -> Result<f64> {
    state
        .gaas_on(s)
        .iter()
        .filter(|&&j| j != k)
        .try_fold(0.0, |acc, &j| Ok(acc + r.get(k, j)?))
}

/// Interference GAA `k` receives on `s` from the other GAAs assigned there.
pub fn cochannel_interference(
    state: &AllocationState,
    k: CbsdId,
    s: ChannelId,
    r: &InterferenceMatrix,
) -> Result<f64> {
    require_gaa(state, k)?;
    state.occupied_by_pal(s)?;
    interference_on(state, k, s, r)
}

/// Whether GAA `k` may join `s` under `mode`.
pub fn feasible_for_gaa(
    state: &AllocationState,
    k: CbsdId,
    s: ChannelId,
    r: &InterferenceMatrix,
    mode: FeasibilityMode,
) -> Result<bool> {
    let own = cochannel_interference(state, k, s, r)?;
    if own > r.gamma() {
        return Ok(false);
    }
    if mode == FeasibilityMode::Mutual {
        for &j in state.gaas_on(s).iter().filter(|&&j| j != k) {
            if interference_on(state, j, s, r)? + r.get(j, k)? > r.gamma() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Position;

    fn ids(v: &[u32]) -> Vec<CbsdId> {
        v.iter().map(|&i| CbsdId(i)).collect()
    }

    fn fig2_r() -> InterferenceMatrix {
        InterferenceMatrix::from_dense(
            ids(&[101, 102, 103]),
            vec![0.0, 2.0, 2.0, 2.0, 0.0, 0.5, 2.0, 0.5, 0.0],
            1.0,
        )
        .unwrap()
    }

    fn gaa_state(members: &[u32]) -> AllocationState {
        AllocationState::with_members(
            1,
            7,
            members.iter().map(|&i| (CbsdId(i), Tier::Gaa)),
        )
    }

    #[test]
    fn power_law_unit_distance() {
        let gaas = vec![
            Cbsd::new(1, Tier::Gaa, 1).at(0.0, 0.0),
            Cbsd::new(2, Tier::Gaa, 1).at(1.0, 0.0),
        ];
        let model = PropagationModel::PowerLaw {
            tx_power: 1.0,
            exponent: 2.0,
            min_distance: 0.1,
        };
        let r = build_interference_matrix(&gaas, model, 1.0).unwrap();
        assert_eq!(r.get(CbsdId(1), CbsdId(2)).unwrap(), 1.0);
        assert_eq!(r.get(CbsdId(2), CbsdId(1)).unwrap(), 1.0);
        assert_eq!(r.get(CbsdId(1), CbsdId(1)).unwrap(), 0.0);
    }

    #[test]
    fn power_law_single_gaa_is_zero() {
        let gaas = vec![Cbsd::new(1, Tier::Gaa, 1).at(3.0, 4.0)];
        let model = PropagationModel::PowerLaw {
            tx_power: 5.0,
            exponent: 3.0,
            min_distance: 1.0,
        };
        let r = build_interference_matrix(&gaas, model, 0.0).unwrap();
        assert_eq!(r.dense(), &[0.0]);
    }

    #[test]
    fn power_law_three_in_a_row() {
        // 1 / d^2 evaluated by hand: d=1 -> 1.0, d=2 -> 0.25
        let gaas: Vec<_> = (0..3)
            .map(|i| Cbsd::new(i, Tier::Gaa, 1).at(0.0, f64::from(i)))
            .collect();
        let model = PropagationModel::PowerLaw {
            tx_power: 1.0,
            exponent: 2.0,
            min_distance: 0.1,
        };
        let r = build_interference_matrix(&gaas, model, 1.0).unwrap();
        assert_eq!(r.get(CbsdId(0), CbsdId(2)).unwrap(), 0.25);
        assert_eq!(r.get(CbsdId(0), CbsdId(1)).unwrap(), 1.0);
        assert_eq!(r.get(CbsdId(1), CbsdId(2)).unwrap(), 1.0);
    }

    #[test]
    fn power_law_clamps_near_field() {
        let gaas = vec![
            Cbsd::new(1, Tier::Gaa, 1).at(0.0, 0.0),
            Cbsd::new(2, Tier::Gaa, 1).at(0.0, 0.0),
        ];
        let model = PropagationModel::PowerLaw {
            tx_power: 1.0,
            exponent: 2.0,
            min_distance: 0.5,
        };
        let r = build_interference_matrix(&gaas, model, 1.0).unwrap();
        assert_eq!(r.get(CbsdId(1), CbsdId(2)).unwrap(), 4.0);
    }

    #[test]
    fn power_law_config_errors() {
        let no_pos = vec![Cbsd::new(1, Tier::Gaa, 1)];
        let model = PropagationModel::PowerLaw {
            tx_power: 1.0,
            exponent: 2.0,
            min_distance: 0.1,
        };
        assert!(matches!(
            build_interference_matrix(&no_pos, model, 1.0),
            Err(Error::Config(_))
        ));
        let bad = PropagationModel::PowerLaw {
            tx_power: -1.0,
            exponent: 2.0,
            min_distance: 0.1,
        };
        let gaas = vec![Cbsd {
            position: Some(Position { x: 0.0, y: 0.0 }),
            ..Cbsd::new(1, Tier::Gaa, 1)
        }];
        assert!(matches!(
            build_interference_matrix(&gaas, bad, 1.0),
            Err(Error::Config(_))
        ));
        assert!(build_interference_matrix(&gaas, model, -0.5).is_err());
    }

    #[test]
    fn dense_matrix_rejects_asymmetry_and_diagonal() {
        let asym = InterferenceMatrix::from_dense(ids(&[1, 2]), vec![0.0, 1.0, 2.0, 0.0], 1.0);
        assert!(matches!(asym, Err(Error::Config(m)) if m.contains("asymmetric")));
        let diag = InterferenceMatrix::from_dense(ids(&[1, 2]), vec![1.0, 1.0, 1.0, 0.0], 1.0);
        assert!(diag.is_err());
        let neg = InterferenceMatrix::from_dense(ids(&[1, 2]), vec![0.0, -1.0, -1.0, 0.0], 1.0);
        assert!(neg.is_err());
    }

    #[test]
    fn cochannel_interference_fig2() {
        let r = fig2_r();
        let mut state = gaa_state(&[101, 102, 103]);
        let ch5 = ChannelId(4);
        assert_eq!(cochannel_interference(&state, CbsdId(103), ch5, &r).unwrap(), 0.0);
        state.assign(CbsdId(102), ch5).unwrap();
        assert_eq!(cochannel_interference(&state, CbsdId(103), ch5, &r).unwrap(), 0.5);
        // the evaluating GAA's own assignment never counts
        state.assign(CbsdId(103), ch5).unwrap();
        assert_eq!(cochannel_interference(&state, CbsdId(103), ch5, &r).unwrap(), 0.5);
    }

    #[test]
    fn cochannel_interference_is_additive() {
        let r = InterferenceMatrix::from_dense(
            ids(&[1, 2, 3]),
            vec![0.0, 0.2, 0.3, 0.2, 0.0, 0.0, 0.3, 0.0, 0.0],
            1.0,
        )
        .unwrap();
        let mut state = gaa_state(&[1, 2, 3]);
        state.assign(CbsdId(2), ChannelId(0)).unwrap();
        state.assign(CbsdId(3), ChannelId(0)).unwrap();
        let total = cochannel_interference(&state, CbsdId(1), ChannelId(0), &r).unwrap();
        assert!((total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cochannel_interference_rejects_pal() {
        let r = fig2_r();
        let state = AllocationState::with_members(1, 7, [(CbsdId(1), Tier::Pal)]);
        assert!(matches!(
            cochannel_interference(&state, CbsdId(1), ChannelId(0), &r),
            Err(Error::NotAGaa(CbsdId(1)))
        ));
    }

    #[test]
    fn feasibility_fig2_and_boundaries() {
        let r = fig2_r();
        let mut state = gaa_state(&[101, 102, 103]);
        let ch5 = ChannelId(4);
        assert!(feasible_for_gaa(&state, CbsdId(101), ch5, &r, FeasibilityMode::Literal).unwrap());
        state.assign(CbsdId(102), ch5).unwrap();
        assert!(!feasible_for_gaa(&state, CbsdId(101), ch5, &r, FeasibilityMode::Literal).unwrap());
        assert!(feasible_for_gaa(&state, CbsdId(103), ch5, &r, FeasibilityMode::Mutual).unwrap());

        let zero = fig2_r().with_gamma(0.0).unwrap();
        assert!(!feasible_for_gaa(&state, CbsdId(103), ch5, &zero, FeasibilityMode::Literal).unwrap());
        assert!(feasible_for_gaa(&state, CbsdId(103), ChannelId(5), &zero, FeasibilityMode::Literal).unwrap());
    }

    #[test]
    fn mutual_protects_incumbents() {
        // 1 already receives 0.8 from 2; 3 sees only 0.3 but would push 1 to 1.1
        let r = InterferenceMatrix::from_dense(
            ids(&[1, 2, 3]),
            vec![0.0, 0.8, 0.3, 0.8, 0.0, 0.0, 0.3, 0.0, 0.0],
            1.0,
        )
        .unwrap();
        let mut state = gaa_state(&[1, 2, 3]);
        state.assign(CbsdId(1), ChannelId(0)).unwrap();
        state.assign(CbsdId(2), ChannelId(0)).unwrap();
        assert!(feasible_for_gaa(&state, CbsdId(3), ChannelId(0), &r, FeasibilityMode::Literal).unwrap());
        assert!(!feasible_for_gaa(&state, CbsdId(3), ChannelId(0), &r, FeasibilityMode::Mutual).unwrap());
        let r = r.with_gamma(1.2).unwrap();
        assert!(feasible_for_gaa(&state, CbsdId(3), ChannelId(0), &r, FeasibilityMode::Mutual).unwrap());
    }
}
