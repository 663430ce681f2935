use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_shape, MatchResult, Prompt, QuerySpec, TraversalError};
use crate::scorer::{apply_temperature, top_k_set, Scorer};
use crate::vocab::TokenId;

/// Attempts per sample before it is recorded as a dead end.
pub const DEFAULT_MAX_RETRIES: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub enum SampleOutcome {
    Match {
        result: MatchResult,
        /// Index into the uniform-choice prompt set (0 for a fixed prompt).
        prompt_index: usize,
        attempts: usize,
    },
    DeadEnd {
        prompt_index: usize,
        attempts: usize,
    },
}

impl SampleOutcome {
    pub fn as_match(&self) -> Option<&MatchResult> {
        match self {
            SampleOutcome::Match { result, .. } => Some(result),
            SampleOutcome::DeadEnd { .. } => None,
        }
    }

    pub fn prompt_index(&self) -> usize {
        match self {
            SampleOutcome::Match { prompt_index, .. } | SampleOutcome::DeadEnd { prompt_index, .. } => {
                *prompt_index
            }
        }
    }

    /// JSON line: a match line, or `{"rank":..,"dead_end":true,"attempts":..}`.
    pub fn to_json_line(&self, rank: usize) -> String {
        match self {
            SampleOutcome::Match { result, .. } => result.to_json_line(),
            SampleOutcome::DeadEnd { attempts, .. } => {
                serde_json::json!({"rank": rank, "dead_end": true, "attempts": attempts}).to_string()
            }
        }
    }
}

enum Walk {
    Accepted(Vec<TokenId>, f64),
    DeadEnd,
}

/// Draws `num_samples` accepted sequences.
///
/// Each step samples among the automaton's edges that survive top-k, with
/// the model's probabilities renormalized over them. In a non-terminated
/// automaton an accepting state also offers "stop", weighted by the model's
/// EOS probability. A walk that runs out of options, or reaches
/// `max_match_tokens` without accepting, is restarted from a freshly drawn
/// prompt up to `max_retries` times. The same seed gives the same samples.
pub fn sample<S: Scorer>(
    spec: &QuerySpec<'_>,
    scorer: S,
    num_samples: usize,
) -> Result<Vec<SampleOutcome>, TraversalError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(num_samples);
    for i in 0..num_samples {
        let mut prompt_index = 0;
        let mut outcome = None;
        for attempt in 1..=spec.max_retries {
            let prompt = match &spec.prompt {
                Prompt::Fixed(p) => p.as_slice(),
                Prompt::UniformChoice(choices) => {
                    prompt_index = rng.gen_range(0..choices.len());
                    choices[prompt_index].as_slice()
                }
            };
            if let Walk::Accepted(tokens, logprob) = walk(spec, &scorer, prompt, &mut rng)? {
                let decoded = spec.vocab.decode(&tokens)?;
                outcome = Some(SampleOutcome::Match {
                    result: MatchResult { tokens, decoded, logprob, rank: i + 1 },
                    prompt_index,
                    attempts: attempt,
                });
                break;
            }
        }
        out.push(outcome.unwrap_or(SampleOutcome::DeadEnd { prompt_index, attempts: spec.max_retries }));
    }
    Ok(out)
}

fn walk<S: Scorer>(
    spec: &QuerySpec<'_>,
    scorer: &S,
    prompt: &[TokenId],
    rng: &mut ChaCha8Rng,
) -> Result<Walk, TraversalError> {
    let ta = spec.automaton;
    let eos = spec.vocab.eos_id();
    let mut context = prompt.to_vec();
    let mut tokens: Vec<TokenId> = Vec::new();
    let mut logprob = 0.0;
    let mut state = ta.start();
    loop {
        let accepting = ta.is_accept(state);
        if ta.terminated() && accepting {
            return Ok(Walk::Accepted(tokens, logprob));
        }
        if tokens.len() >= spec.max_match_tokens || ta.edges(state).is_empty() {
            return Ok(if accepting { Walk::Accepted(tokens, logprob) } else { Walk::DeadEnd });
        }
        let raw = scorer.next_logprobs(&context)?;
        check_shape(&raw, spec.vocab)?;
        let lp = apply_temperature(&raw, spec.temperature);
        let allowed = spec.allowed_edges(state, &lp);
        let mut weights: Vec<f64> = allowed.iter().map(|&(t, _)| lp[t as usize].exp()).collect();
        let stop_weight = if accepting {
            if allowed.is_empty() {
                return Ok(Walk::Accepted(tokens, logprob));
            }
            lp[eos as usize].exp()
        } else {
            0.0
        };
        weights.push(stop_weight);
        let Some(choice) = pick(&weights, rng) else {
            return Ok(if accepting { Walk::Accepted(tokens, logprob) } else { Walk::DeadEnd });
        };
        if choice == allowed.len() {
            return Ok(Walk::Accepted(tokens, logprob));
        }
        let (t, to) = allowed[choice];
        tokens.push(t);
        context.push(t);
        logprob += raw[t as usize];
        state = to;
    }
}

/// Index drawn proportionally to `weights`; `None` when they sum to zero.
fn pick(weights: &[f64], rng: &mut impl Rng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let mut u = rng.gen::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = Some(i);
        if u < w {
            return Some(i);
        }
        u -= w;
    }
    last
}

/// Plain ancestral sampling with no automaton: up to `max_tokens` tokens,
/// stopping early after EOS. The returned tokens exclude EOS; the flag says
/// whether EOS was drawn.
pub fn sample_unconstrained<S: Scorer, R: Rng>(
    scorer: &S,
    prompt: &[TokenId],
    eos_id: TokenId,
    max_tokens: usize,
    top_k: Option<usize>,
    temperature: f64,
    rng: &mut R,
) -> Result<(Vec<TokenId>, bool), TraversalError> {
    let mut context = prompt.to_vec();
    let mut out = Vec::new();
    while out.len() < max_tokens {
        let lp = apply_temperature(&scorer.next_logprobs(&context)?, temperature);
        let candidates: Vec<TokenId> = match top_k {
            Some(k) => top_k_set(&lp, k),
            None => (0..lp.len() as TokenId).collect(),
        };
        let weights: Vec<f64> = candidates.iter().map(|&t| lp[t as usize].exp()).collect();
        let Some(i) = pick(&weights, rng) else {
            break;
        };
        let t = candidates[i];
        if t == eos_id {
            return Ok((out, true));
        }
        out.push(t);
        context.push(t);
    }
    Ok((out, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::Dfa;
    use crate::scorer::{FixtureScorer, UniformScorer};
    use crate::transducer::{transduce, TokenAutomaton, TransduceOptions};
    use crate::vocab::{TokenTrie, Vocabulary};

    fn automaton(p: &str, v: &Vocabulary, terminated: bool) -> TokenAutomaton {
        transduce(&Dfa::compile(p).unwrap(), v, &TokenTrie::build(v), &TransduceOptions::terminated(terminated))
            .unwrap()
    }

    #[test]
    fn single_sequence_language() {
        let v = Vocabulary::from_strs(&["ab", "c"]);
        let ta = automaton("ab", &v, true);
        let mut spec = QuerySpec::new(&ta, &v);
        spec.seed = 3;
        let out = sample(&spec, UniformScorer::new(3), 50).unwrap();
        assert!(out.iter().all(|o| o.as_match().map(|m| m.tokens.clone()) == Some(vec![0, 2])));
    }

    #[test]
    fn seed_reproducible() {
        let v = Vocabulary::from_strs(&["a", "b", "c"]);
        let ta = automaton("[abc]{1,4}", &v, false);
        let mut spec = QuerySpec::new(&ta, &v);
        spec.seed = 11;
        let a = sample(&spec, UniformScorer::new(4), 40).unwrap();
        let b = sample(&spec, UniformScorer::new(4), 40).unwrap();
        assert_eq!(a, b);
        spec.seed = 12;
        assert_ne!(a, sample(&spec, UniformScorer::new(4), 40).unwrap());
    }

    #[test]
    fn dead_end_after_retries() {
        // full-vocab top-1 always picks "x", which the automaton never allows
        let v = Vocabulary::from_strs(&["x", "a"]);
        let ta = automaton("a", &v, false);
        let fx = FixtureScorer::from_probs(&[0.8, 0.1, 0.1]).unwrap();
        let mut spec = QuerySpec::new(&ta, &v);
        spec.top_k = Some(1);
        spec.max_retries = 5;
        let out = sample(&spec, &fx, 2).unwrap();
        assert_eq!(out[0], SampleOutcome::DeadEnd { prompt_index: 0, attempts: 5 });
        spec.topk_scope = super::super::TopKScope::AllowedOnly;
        let out = sample(&spec, &fx, 2).unwrap();
        assert_eq!(out[0].as_match().unwrap().decoded, b"a");
    }

    #[test]
    fn unconstrained_stops_at_eos() {
        let fx = FixtureScorer::from_probs(&[0.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (toks, ended) = sample_unconstrained(&fx, &[], 1, 8, None, 1.0, &mut rng).unwrap();
        assert!(toks.is_empty() && ended);
        let fx = FixtureScorer::from_probs(&[1.0, 0.0]).unwrap();
        let (toks, ended) = sample_unconstrained(&fx, &[], 1, 4, None, 1.0, &mut rng).unwrap();
        assert_eq!((toks, ended), (vec![0; 4], false));
    }

    #[test]
    fn pick_skips_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(pick(&[0.0, 2.0, 0.0], &mut rng), Some(1));
        }
        assert_eq!(pick(&[0.0, 0.0], &mut rng), None);
    }
}
