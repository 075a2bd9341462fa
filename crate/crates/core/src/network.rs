//! Chemical reaction networks with mass-action kinetics.
//!
//! A network is an ordered list of reactions over `L` species. The order is
//! part of the network's identity: the reaction selector walks cumulative
//! propensities in this order, so permuting reactions yields a different
//! pathwise coupling even though the Markov chain law is unchanged.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vector of non-negative species counts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(pub Vec<u64>);

impl State {
    pub fn new(counts: Vec<u64>) -> Self {
        State(counts)
    }

    /// Single-species state.
    pub fn scalar(x: u64) -> Self {
        State(vec![x])
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The only count of a single-species state.
    pub fn as_scalar(&self) -> Option<u64> {
        match self.0.as_slice() {
            [x] => Some(*x),
            _ => None,
        }
    }
}

impl From<u64> for State {
    fn from(x: u64) -> Self {
        State::scalar(x)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_scalar() {
            Some(x) => write!(f, "{x}"),
            None => write!(f, "{:?}", self.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reaction {
    reactants: Vec<u32>,
    products: Vec<u32>,
    rate: f64,
    change: Vec<i64>,
    // (species, stoichiometric coefficient) for nonzero reactant coefficients
    reactant_terms: Vec<(usize, u32)>,
}

impl Reaction {
    pub fn new(reactants: Vec<u32>, products: Vec<u32>, rate: f64) -> Result<Self> {
        if reactants.len() != products.len() {
            return Err(Error::invalid(format!(
                "reactant and product stoichiometry lengths differ ({} vs {})",
                reactants.len(),
                products.len()
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::invalid(format!("rate constant must be positive and finite, got {rate}")));
        }
        let change = reactants
            .iter()
            .zip(&products)
            .map(|(&s, &p)| i64::from(p) - i64::from(s))
            .collect();
        let reactant_terms = reactants
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0)
            .map(|(l, &s)| (l, s))
            .collect();
        Ok(Reaction {
            reactants,
            products,
            rate,
            change,
            reactant_terms,
        })
    }

    pub fn reactants(&self) -> &[u32] {
        &self.reactants
    }

    pub fn products(&self) -> &[u32] {
        &self.products
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// State-change vector `products - reactants`.
    pub fn change(&self) -> &[i64] {
        &self.change
    }

    /// Mass-action propensity with falling factorials:
    /// `rate * prod_l x_l (x_l - 1) ... (x_l - s_l + 1)`.
    #[inline]
    pub(crate) fn propensity_unchecked(&self, x: &[u64]) -> f64 {
        let mut a = self.rate;
        for &(l, s) in &self.reactant_terms {
            let xl = x[l];
            if xl < u64::from(s) {
                return 0.0;
            }
            for i in 0..u64::from(s) {
                a *= (xl - i) as f64;
            }
        }
        a
    }
}

/// The two networks studied throughout: a birth-death process and the
/// bistable Schlögl model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    BirthDeath,
    Schloegl,
}

impl Builtin {
    pub fn rate_count(self) -> usize {
        match self {
            Builtin::BirthDeath => 2,
            Builtin::Schloegl => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::BirthDeath => "birth_death",
            Builtin::Schloegl => "schloegl",
        }
    }

    /// Rate constants used for the reference experiments.
    pub fn default_rates(self) -> &'static [f64] {
        match self {
            Builtin::BirthDeath => &[10.0, 1.0],
            Builtin::Schloegl => &[6.0, 3.5, 0.4, 0.0105],
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "birth_death" | "birth-death" => Ok(Builtin::BirthDeath),
            "schloegl" | "schlogl" | "schlögl" => Ok(Builtin::Schloegl),
            other => Err(Error::invalid(format!("unknown builtin network `{other}`"))),
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An immutable reaction network. Safe to share between simulation workers.
#[derive(Clone, Debug, PartialEq)]
pub struct ReactionNetwork {
    name: String,
    species: Vec<String>,
    reactions: Vec<Reaction>,
}

impl ReactionNetwork {
    pub fn new(name: impl Into<String>, species: Vec<String>, reactions: Vec<Reaction>) -> Result<Self> {
        if species.is_empty() {
            return Err(Error::invalid("network needs at least one species"));
        }
        if reactions.is_empty() {
            return Err(Error::invalid("network needs at least one reaction"));
        }
        for (k, r) in reactions.iter().enumerate() {
            if r.reactants.len() != species.len() {
                return Err(Error::invalid(format!(
                    "reaction {} has stoichiometry of length {}, expected {}",
                    k + 1,
                    r.reactants.len(),
                    species.len()
                )));
            }
        }
        Ok(ReactionNetwork {
            name: name.into(),
            species,
            reactions,
        })
    }

    /// Builds one of the builtin networks, keeping the reference reaction order.
    pub fn builtin(which: Builtin, rates: &[f64]) -> Result<Self> {
        if rates.len() != which.rate_count() {
            return Err(Error::invalid(format!(
                "{which} takes {} rate constants, got {}",
                which.rate_count(),
                rates.len()
            )));
        }
        let r = |s: u32, p: u32, k: usize| Reaction::new(vec![s], vec![p], rates[k]);
        let reactions = match which {
            // 0 -> S, S -> 0
            Builtin::BirthDeath => vec![r(0, 1, 0)?, r(1, 0, 1)?],
            // 0 -> S, S -> 0, 2S -> 3S, 3S -> 2S
            Builtin::Schloegl => vec![r(0, 1, 0)?, r(1, 0, 1)?, r(2, 3, 2)?, r(3, 2, 3)?],
        };
        ReactionNetwork::new(which.name(), vec!["S".to_string()], reactions)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn reaction_count(&self) -> usize {
        self.reactions.len()
    }

    /// True when the network has one species and every reaction changes it by exactly ±1.
    pub fn is_unit_step_single_species(&self) -> bool {
        self.species.len() == 1 && self.reactions.iter().all(|r| r.change[0].abs() == 1)
    }

    pub(crate) fn check_dim(&self, x: &[u64]) -> Result<()> {
        if x.len() != self.species.len() {
            return Err(Error::DimensionMismatch {
                expected: self.species.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn require_single_species(&self, what: &str) -> Result<()> {
        if self.species.len() != 1 {
            return Err(Error::Unsupported(format!(
                "{what} requires a single-species network, `{}` has {} species",
                self.name,
                self.species.len()
            )));
        }
        Ok(())
    }

    /// Propensities `(alpha_1(x), ..., alpha_K(x))` in reaction order.
    pub fn propensities(&self, x: &State) -> Result<Vec<f64>> {
        self.check_dim(&x.0)?;
        Ok(self.reactions.iter().map(|r| r.propensity_unchecked(&x.0)).collect())
    }

    pub fn total_propensity(&self, x: &State) -> Result<f64> {
        self.check_dim(&x.0)?;
        Ok(self.total_propensity_unchecked(&x.0))
    }

    #[inline]
    pub(crate) fn total_propensity_unchecked(&self, x: &[u64]) -> f64 {
        self.reactions.iter().map(|r| r.propensity_unchecked(x)).sum()
    }

    /// Fires reaction `k` (0-based) and returns `x + nu_k`.
    pub fn apply_reaction(&self, x: &State, k: usize) -> Result<State> {
        self.check_dim(&x.0)?;
        let mut y = x.clone();
        self.fire_in_place(&mut y.0, k)?;
        Ok(y)
    }

    pub(crate) fn fire_in_place(&self, x: &mut [u64], k: usize) -> Result<()> {
        let reaction = self
            .reactions
            .get(k)
            .ok_or_else(|| Error::invalid(format!("reaction index {k} out of range (K = {})", self.reactions.len())))?;
        if reaction.propensity_unchecked(x) <= 0.0 {
            return Err(Error::ContractViolation(format!(
                "reaction {} fired with zero propensity in state {:?}",
                k + 1,
                x
            )));
        }
        for (xl, &dl) in x.iter_mut().zip(&reaction.change) {
            // zero propensity was excluded above, so reactants are present
            *xl = xl.checked_add_signed(dl).ok_or_else(|| {
                Error::ContractViolation(format!("reaction {} drives a count negative", k + 1))
            })?;
        }
        Ok(())
    }

    /// One-step law of the embedded chain of a single-species network,
    /// grouped by state change: `(change, probability)` sorted by change.
    /// Empty when `x` is absorbing.
    pub fn jump_law(&self, x: u64) -> Result<Vec<(i64, f64)>> {
        self.require_single_species("jump_law")?;
        let xs = [x];
        let total = self.total_propensity_unchecked(&xs);
        let mut law: BTreeMap<i64, f64> = BTreeMap::new();
        if total <= 0.0 {
            return Ok(Vec::new());
        }
        for r in &self.reactions {
            let a = r.propensity_unchecked(&xs);
            if a > 0.0 {
                *law.entry(r.change[0]).or_insert(0.0) += a / total;
            }
        }
        Ok(law.into_iter().collect())
    }

    /// Probability `P_1(x)` of an upward step for a unit-step single-species network.
    pub fn up_probability(&self, x: u64) -> Result<f64> {
        if !self.is_unit_step_single_species() {
            return Err(Error::Unsupported(
                "up_probability requires a single-species network with unit state changes".into(),
            ));
        }
        let xs = [x];
        let total = self.total_propensity_unchecked(&xs);
        if total <= 0.0 {
            return Err(Error::Absorbing { state: vec![x], step: 0 });
        }
        let up: f64 = self
            .reactions
            .iter()
            .filter(|r| r.change[0] == 1)
            .map(|r| r.propensity_unchecked(&xs))
            .sum();
        Ok(up / total)
    }

    /// Serializable definition in the network file schema.
    pub fn to_definition(&self) -> NetworkDefinition {
        let side = |coeffs: &[u32]| -> BTreeMap<String, u32> {
            self.species
                .iter()
                .zip(coeffs)
                .filter(|(_, &c)| c > 0)
                .map(|(s, &c)| (s.clone(), c))
                .collect()
        };
        NetworkDefinition {
            name: Some(self.name.clone()),
            species: self.species.clone(),
            reactions: self
                .reactions
                .iter()
                .map(|r| ReactionDefinition {
                    reactants: side(&r.reactants),
                    products: side(&r.products),
                    rate: r.rate,
                })
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_definition())?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let def: NetworkDefinition = serde_json::from_str(text)?;
        def.build()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }
}

/// On-disk network description:
///
/// ```json
/// { "species": ["S"],
///   "reactions": [ { "reactants": {}, "products": {"S": 1}, "rate": 10.0 },
///                  { "reactants": {"S": 1}, "products": {}, "rate": 1.0 } ] }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkDefinition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub species: Vec<String>,
    pub reactions: Vec<ReactionDefinition>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReactionDefinition {
    #[serde(default)]
    pub reactants: BTreeMap<String, u32>,
    #[serde(default)]
    pub products: BTreeMap<String, u32>,
    pub rate: f64,
}

impl NetworkDefinition {
    pub fn build(&self) -> Result<ReactionNetwork> {
        let index = |name: &str| {
            self.species
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::invalid(format!("unknown species `{name}`")))
        };
        for (i, s) in self.species.iter().enumerate() {
            if self.species[..i].contains(s) {
                return Err(Error::invalid(format!("duplicate species `{s}`")));
            }
        }
        let mut reactions = Vec::with_capacity(self.reactions.len());
        for rd in &self.reactions {
            let mut reactants = vec![0u32; self.species.len()];
            let mut products = vec![0u32; self.species.len()];
            for (name, &c) in &rd.reactants {
                reactants[index(name)?] = c;
            }
            for (name, &c) in &rd.products {
                products[index(name)?] = c;
            }
            reactions.push(Reaction::new(reactants, products, rd.rate)?);
        }
        ReactionNetwork::new(self.name.clone().unwrap_or_else(|| "custom".into()), self.species.clone(), reactions)
    }
}
