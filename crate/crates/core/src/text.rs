//! Small string helpers shared by spelling correction and query validation.

/// Levenshtein distance between `a` and `b` if it is at most `max`.
///
/// Uses a banded DP and bails out as soon as every cell in a row exceeds
/// `max`.
pub fn levenshtein_within(a: &[char], b: &[char], max: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > max {
        return None;
    }
    if a.is_empty() || b.is_empty() {
        let d = a.len().max(b.len());
        return (d <= max).then_some(d);
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
            row_min = row_min.min(cur[j + 1]);
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[b.len()];
    (d <= max).then_some(d)
}

/// Closest `limit` strings to `word` by edit distance, ties by lexical order.
pub fn closest_strings<'a, I>(word: &str, pool: I, limit: usize) -> Vec<String>
where
    I: IntoIterator<Item = &'a str>,
{
    let w: Vec<char> = word.chars().collect();
    let mut scored: Vec<(usize, &str)> = pool
        .into_iter()
        .filter_map(|cand| {
            let c: Vec<char> = cand.chars().collect();
            levenshtein_within(&w, &c, 3).map(|d| (d, cand))
        })
        .collect();
    scored.sort_unstable();
    scored
        .into_iter()
        .take(limit)
        .map(|(_, s)| s.to_owned())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lev(a: &str, b: &str, max: usize) -> Option<usize> {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        levenshtein_within(&a, &b, max)
    }

    #[test]
    fn distances() {
        assert_eq!(lev("forrest", "forest", 2), Some(1));
        assert_eq!(lev("kitten", "sitting", 3), Some(3));
        assert_eq!(lev("kitten", "sitting", 2), None);
        assert_eq!(lev("", "ab", 2), Some(2));
        assert_eq!(lev("abc", "abc", 0), Some(0));
    }

    #[test]
    fn closest_orders_by_distance_then_lexically() {
        let pool = ["forest", "forests", "fortress", "tree"];
        assert_eq!(
            closest_strings("forrest", pool.iter().copied(), 2),
            vec!["forest".to_owned(), "forests".to_owned()]
        );
    }
}
