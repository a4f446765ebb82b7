//! Recognizer output voting error reduction (ROVER).
//!
//! Hypotheses are aligned one after another into a word transition network
//! (a sequence of slots, each holding the competing tokens and the null
//! arc `@`), then every slot is decided by a vote that mixes token
//! frequency and confidence.

use crate::error::{Error, Result};

pub const DEFAULT_NULL_CONFIDENCE: f64 = 0.5;

/// A recognizer output: tokens with optional per-token confidences.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<String>,
    pub confidences: Option<Vec<f64>>,
}

impl Hypothesis {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        Self {
            tokens: tokens.into_iter().map(Into::into).collect(),
            confidences: None,
        }
    }

    pub fn from_text(text: &str) -> Self {
        Self::new(text.split_whitespace())
    }

    pub fn with_confidences(mut self, confidences: Vec<f64>) -> Result<Self> {
        if confidences.len() != self.tokens.len() {
            return Err(Error::param(format!(
                "{} confidences for {} tokens",
                confidences.len(),
                self.tokens.len()
            )));
        }
        if confidences.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::param("confidences must lie in [0, 1]"));
        }
        self.confidences = Some(confidences);
        Ok(self)
    }

    fn confidence(&self, i: usize) -> f64 {
        self.confidences.as_ref().map_or(1.0, |c| c[i])
    }
}

/// One competing arc of a slot. `token == None` is the null arc `@`.
#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub token: Option<String>,
    pub count: usize,
    pub confidence_sum: f64,
    /// Lowest index of the systems voting for this arc.
    pub first_system: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Slot {
    pub arcs: Vec<Arc>,
}

impl Slot {
    fn vote(&mut self, token: Option<&str>, confidence: f64, system: usize, weight: usize) {
        match self.arcs.iter_mut().find(|a| a.token.as_deref() == token) {
            Some(arc) => {
                arc.count += weight;
                arc.confidence_sum += confidence * weight as f64;
                arc.first_system = arc.first_system.min(system);
            }
            None => self.arcs.push(Arc {
                token: token.map(str::to_owned),
                count: weight,
                confidence_sum: confidence * weight as f64,
                first_system: system,
            }),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.arcs
            .iter()
            .any(|a| a.count > 0 && a.token.as_deref() == Some(token))
    }

    pub fn count(&self, token: Option<&str>) -> usize {
        self.arcs
            .iter()
            .find(|a| a.token.as_deref() == token)
            .map_or(0, |a| a.count)
    }

    pub fn total(&self) -> usize {
        self.arcs.iter().map(|a| a.count).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordTransitionNetwork {
    slots: Vec<Slot>,
    n_systems: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Match,
    Substitute,
    /// Slot left without a token from the new hypothesis.
    Delete,
    /// Hypothesis token with no slot: a new slot is opened.
    Insert,
}

impl WordTransitionNetwork {
    pub fn from_hypothesis(hyp: &Hypothesis) -> Self {
        let slots = hyp
            .tokens
            .iter()
            .enumerate()
            .map(|(i, tok)| {
                let mut slot = Slot::default();
                slot.vote(Some(tok), hyp.confidence(i), 0, 1);
                slot
            })
            .collect();
        Self {
            slots,
            n_systems: 1,
        }
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn n_systems(&self) -> usize {
        self.n_systems
    }

    /// Aligns `hyp` against the slot sequence by dynamic programming
    /// (match 0, substitution 1, insertion/deletion 1) and absorbs it.
    /// Backtrace preference: match, substitution, deletion, insertion.
    pub fn align(&mut self, hyp: &Hypothesis) {
        let system = self.n_systems;
        let (s, h) = (self.slots.len(), hyp.tokens.len());
        let mut cost = vec![vec![0usize; h + 1]; s + 1];
        for (i, row) in cost.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, v) in cost[0].iter_mut().enumerate() {
            *v = j;
        }
        let sub_cost = |i: usize, j: usize| usize::from(!self.slots[i].contains(&hyp.tokens[j]));
        for i in 1..=s {
            for j in 1..=h {
                cost[i][j] = (cost[i - 1][j - 1] + sub_cost(i - 1, j - 1))
                    .min(cost[i - 1][j] + 1)
                    .min(cost[i][j - 1] + 1);
            }
        }

        let mut moves = Vec::with_capacity(s + h);
        let (mut i, mut j) = (s, h);
        while i > 0 || j > 0 {
            let here = cost[i][j];
            if i > 0 && j > 0 {
                let c = sub_cost(i - 1, j - 1);
                if cost[i - 1][j - 1] + c == here {
                    moves.push(if c == 0 {
                        Move::Match
                    } else {
                        Move::Substitute
                    });
                    i -= 1;
                    j -= 1;
                    continue;
                }
            }
            if i > 0 && cost[i - 1][j] + 1 == here {
                moves.push(Move::Delete);
                i -= 1;
            } else {
                moves.push(Move::Insert);
                j -= 1;
            }
        }
        moves.reverse();

        let mut slots = Vec::with_capacity(s + h);
        let mut old = std::mem::take(&mut self.slots).into_iter();
        let mut j = 0;
        for m in moves {
            match m {
                Move::Match | Move::Substitute => {
                    let mut slot = old.next().unwrap();
                    slot.vote(Some(&hyp.tokens[j]), hyp.confidence(j), system, 1);
                    slots.push(slot);
                    j += 1;
                }
                Move::Delete => {
                    let mut slot = old.next().unwrap();
                    slot.vote(None, 0.0, system, 1);
                    slots.push(slot);
                }
                Move::Insert => {
                    let mut slot = Slot::default();
                    // all previously absorbed systems skip this position
                    slot.vote(None, 0.0, 0, system);
                    slot.vote(Some(&hyp.tokens[j]), hyp.confidence(j), system, 1);
                    slots.push(slot);
                    j += 1;
                }
            }
        }
        self.slots = slots;
        self.n_systems += 1;
    }

    /// Per-slot decision maximizing
    /// `alpha * count / n_systems + (1 - alpha) * mean_confidence`.
    /// Ties go to the arc first contributed by the lowest-index system;
    /// null arcs are dropped from the output.
    pub fn vote(&self, alpha: f64, null_confidence: f64) -> Vec<String> {
        let n = self.n_systems as f64;
        self.slots
            .iter()
            .filter_map(|slot| {
                let score = |a: &Arc| {
                    let conf = match a.token {
                        None => null_confidence,
                        Some(_) => a.confidence_sum / a.count as f64,
                    };
                    alpha * (a.count as f64 / n) + (1.0 - alpha) * conf
                };
                let mut best: Option<(&Arc, f64)> = None;
                for arc in slot.arcs.iter().filter(|a| a.count > 0) {
                    let sc = score(arc);
                    best = match best {
                        Some((b, bs))
                            if bs > sc || (bs == sc && b.first_system <= arc.first_system) =>
                        {
                            Some((b, bs))
                        }
                        _ => Some((arc, sc)),
                    };
                }
                best.and_then(|(a, _)| a.token.clone())
            })
            .collect()
    }
}

/// Fuses hypotheses in the given order.
pub fn rover(hyps: &[Hypothesis], alpha: f64) -> Result<Vec<String>> {
    rover_with_null_confidence(hyps, alpha, DEFAULT_NULL_CONFIDENCE)
}

pub fn rover_with_null_confidence(
    hyps: &[Hypothesis],
    alpha: f64,
    null_confidence: f64,
) -> Result<Vec<String>> {
    let (first, rest) = hyps
        .split_first()
        .ok_or_else(|| Error::param("ROVER needs at least one hypothesis"))?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param(format!("alpha {alpha} outside [0, 1]")));
    }
    let mut wtn = WordTransitionNetwork::from_hypothesis(first);
    for h in rest {
        wtn.align(h);
    }
    Ok(wtn.vote(alpha, null_confidence))
}
