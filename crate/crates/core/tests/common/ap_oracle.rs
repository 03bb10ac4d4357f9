//! Brute-force AP reference. No sorting: each retained entry's rank is the
//! number of retained entries that beat it (higher score, or equal score and
//! smaller id) plus one, and each positive's precision counts the positives at
//! or above its rank. Terms are summed in rank order.

pub fn brute_force_ap(entries: &[(String, f64, bool)], tau: f64) -> Option<f64> {
    let p = entries.iter().filter(|e| e.2).count();
    if p == 0 {
        return None;
    }
    let retained: Vec<&(String, f64, bool)> = entries.iter().filter(|e| e.1 >= tau).collect();
    let beats = |a: &(String, f64, bool), b: &(String, f64, bool)| a.1 > b.1 || (a.1 == b.1 && a.0 < b.0);
    let rank = |e: &(String, f64, bool)| 1 + retained.iter().filter(|o| beats(o, e)).count();
    let mut terms: Vec<(usize, f64)> = retained
        .iter()
        .filter(|e| e.2)
        .map(|e| {
            let r = rank(e);
            let hits = retained.iter().filter(|o| o.2 && rank(o) <= r).count();
            (r, hits as f64 / r as f64)
        })
        .collect();
    terms.sort_by_key(|t| t.0);
    Some(terms.iter().map(|t| t.1).sum::<f64>() / p as f64)
}
