use crate::phenotype::Genotype;

/// Pairwise mutual information (natural log) from empirical joint frequencies;
/// the diagonal holds each gene's entropy.
pub fn mutual_information_matrix(sample: &[&Genotype], alphabet: &[u8]) -> Vec<Vec<f64>> {
    let l = alphabet.len();
    let n = sample.len() as f64;
    let mut mi = vec![vec![0.0; l]; l];
    if sample.is_empty() {
        return mi;
    }
    let entropy = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let mut marginal = Vec::with_capacity(l);
    for (i, &a) in alphabet.iter().enumerate() {
        let mut counts = vec![0usize; a as usize];
        for g in sample {
            counts[g.0[i] as usize] += 1;
        }
        marginal.push(entropy(&counts));
        mi[i][i] = marginal[i];
    }
    for i in 0..l {
        for j in i + 1..l {
            let (ai, aj) = (alphabet[i] as usize, alphabet[j] as usize);
            let mut joint = vec![0usize; ai * aj];
            for g in sample {
                joint[g.0[i] as usize * aj + g.0[j] as usize] += 1;
            }
            // I(X;Y) = H(X) + H(Y) − H(X,Y), clamped against rounding below zero
            let v = (marginal[i] + marginal[j] - entropy(&joint)).max(0.0);
            mi[i][j] = v;
            mi[j][i] = v;
        }
    }
    mi
}

/// UPGMA over MI similarity. Returns the singletons followed by every merged
/// cluster except the root, so `2ℓ − 2` subsets for `ℓ ≥ 2`.
pub fn build_linkage_tree(mi: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let l = mi.len();
    let mut subsets: Vec<Vec<usize>> = (0..l).map(|i| vec![i]).collect();
    if l <= 1 {
        return subsets;
    }
    let mut clusters: Vec<Vec<usize>> = subsets.clone();
    let mut sim: Vec<Vec<f64>> = mi.to_vec();
    while clusters.len() > 2 {
        // clusters are kept ordered by smallest member, so the first maximum is the tie-break
        let mut best = (0, 1, f64::NEG_INFINITY);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                if sim[a][b] > best.2 {
                    best = (a, b, sim[a][b]);
                }
            }
        }
        let (a, b, _) = best;
        let (na, nb) = (clusters[a].len() as f64, clusters[b].len() as f64);
        let merged_row: Vec<f64> = (0..clusters.len())
            .map(|k| (na * sim[a][k] + nb * sim[b][k]) / (na + nb))
            .collect();
        let mut merged = clusters[a].clone();
        merged.extend_from_slice(&clusters[b]);
        merged.sort_unstable();
        subsets.push(merged.clone());
        // a < b and a holds the smaller minimum, so the merged cluster stays at a
        clusters[a] = merged;
        clusters.remove(b);
        for (k, row) in sim.iter_mut().enumerate() {
            row[a] = merged_row[k];
        }
        sim[a] = merged_row;
        sim.remove(b);
        for row in sim.iter_mut() {
            row.remove(b);
        }
    }
    subsets
}
