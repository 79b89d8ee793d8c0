use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::SkipGramError;

/// Exponent applied to counts in the negative-sampling distribution.
pub const NEGATIVE_POWER: f64 = 0.75;

/// Token counts over a corpus, restricted to tokens seen `min_count` times.
///
/// Indices are dense and ordered by descending count, ties lexically.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    total_tokens: u64,
    min_count: usize,
    sampler: NegativeSampler,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    /// Number of in-vocabulary tokens in the corpus.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn sampler(&self) -> &NegativeSampler {
        &self.sampler
    }

    /// Maps tokens to indices, dropping out-of-vocabulary tokens.
    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens
            .iter()
            .filter_map(|t| self.index(t).map(|i| i as u32))
            .collect()
    }
}

pub fn build_vocab(corpus: &[Vec<String>], min_count: usize) -> Result<Vocabulary, SkipGramError> {
    if corpus.iter().all(Vec::is_empty) {
        return Err(SkipGramError::EmptyCorpus);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for token in corpus.iter().flatten() {
        *counts.entry(token.as_str()).or_default() += 1;
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count as u64)
        .collect();
    if kept.is_empty() {
        return Err(SkipGramError::EmptyVocabulary { min_count });
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let words: Vec<String> = kept.iter().map(|(w, _)| (*w).to_owned()).collect();
    let counts: Vec<u64> = kept.iter().map(|&(_, c)| c).collect();
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    let sampler = NegativeSampler::new(&counts);
    Ok(Vocabulary {
        total_tokens: counts.iter().sum(),
        words,
        counts,
        index,
        min_count,
        sampler,
    })
}

/// Draws vocabulary indices with probability proportional to count^0.75.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    weights: Vec<f64>,
    dist: WeightedIndex<f64>,
}

impl NegativeSampler {
    pub fn new(counts: &[u64]) -> Self {
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| (c as f64).powf(NEGATIVE_POWER))
            .collect();
        let dist = WeightedIndex::new(&weights).expect("counts are positive");
        NegativeSampler { weights, dist }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }

    /// Exact draw probability of each index.
    pub fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus(counts: &[(&str, usize)]) -> Vec<Vec<String>> {
        vec![counts
            .iter()
            .flat_map(|(w, n)| std::iter::repeat_n(w.to_string(), *n))
            .collect()]
    }

    #[test]
    fn min_count_floor() {
        let v = build_vocab(&corpus(&[("tree", 20), ("rare", 3)]), 15).unwrap();
        assert_eq!(v.words(), ["tree"]);
        assert_eq!(v.count(0), 20);
        assert_eq!(v.total_tokens(), 20);
    }

    #[test]
    fn no_floor_keeps_everything() {
        let v = build_vocab(&corpus(&[("tree", 20), ("rare", 3), ("b", 3)]), 1).unwrap();
        assert_eq!(v.words(), ["tree", "b", "rare"]);
        assert_eq!(v.index("rare"), Some(2));
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(build_vocab(&[], 1), Err(SkipGramError::EmptyCorpus)));
        assert!(matches!(
            build_vocab(&corpus(&[("a", 2)]), 5),
            Err(SkipGramError::EmptyVocabulary { .. })
        ));
    }

    #[test]
    fn equal_counts_draw_equally() {
        let v = build_vocab(&corpus(&[("a", 16), ("b", 16)]), 1).unwrap();
        assert_eq!(v.sampler().probabilities(), vec![0.5, 0.5]);
    }

    #[test]
    fn draws_follow_three_quarter_power() {
        let counts = [1000u64, 300, 120, 50, 16, 16, 7];
        let sampler = NegativeSampler::new(&counts);
        let total: f64 = counts.iter().map(|&c| (c as f64).powf(0.75)).sum();
        let expected: Vec<f64> = counts
            .iter()
            .map(|&c| (c as f64).powf(0.75) / total)
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut hist = vec![0usize; counts.len()];
        for _ in 0..n {
            hist[sampler.sample(&mut rng)] += 1;
        }
        let mut chi2 = 0.0;
        for (i, &h) in hist.iter().enumerate() {
            let e = expected[i] * n as f64;
            chi2 += (h as f64 - e).powi(2) / e;
            let observed = h as f64 / n as f64;
            assert!(
                (observed - expected[i]).abs() / expected[i] < 0.02,
                "index {i}: observed {observed}, expected {}",
                expected[i]
            );
        }
        // 6 degrees of freedom; 22.46 is the 0.999 quantile.
        assert!(chi2 < 22.46, "chi-square {chi2}");
    }
}
