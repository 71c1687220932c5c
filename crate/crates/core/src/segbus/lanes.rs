use super::{conflicts, Demand};

pub fn conflict_graph(demands: &[Demand]) -> Vec<Vec<bool>> {
    let demands: Vec<Demand> = demands
        .iter()
        .map(|d| {
            let mut d = d.clone();
            d.windows.sort_unstable();
            d
        })
        .collect();
    let n = demands.len();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if conflicts(&demands[i], &demands[j]) {
                adj[i][j] = true;
                adj[j][i] = true;
            }
        }
    }
    adj
}

pub(crate) fn interval_order(demands: &[Demand]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..demands.len()).collect();
    order.sort_by_key(|&i| (demands[i].span, i));
    order
}

/// First-fit coloring in the given order.
pub fn color_greedy(adj: &[Vec<bool>], order: &[usize]) -> Vec<usize> {
    let n = adj.len();
    let mut color = vec![usize::MAX; n];
    for &v in order {
        let mut used = vec![false; n + 1];
        for u in 0..n {
            if adj[v][u] && color[u] != usize::MAX {
                used[color[u]] = true;
            }
        }
        color[v] = used.iter().position(|&b| !b).expect("n+1 colors suffice");
    }
    color
}

/// Smallest coloring with between `lo` and `hi - 1` colors, by backtracking
/// in saturation order. `None` if every such count fails.
pub fn color_exact(adj: &[Vec<bool>], lo: usize, hi: usize) -> Option<Vec<usize>> {
    (lo.max(1)..hi).find_map(|k| {
        let mut color = vec![usize::MAX; adj.len()];
        extend(adj, k, &mut color).then_some(color)
    })
}

fn extend(adj: &[Vec<bool>], k: usize, color: &mut Vec<usize>) -> bool {
    let n = adj.len();
    // Uncolored vertex with the most distinct neighbor colors, then degree.
    let mut pick: Option<(usize, usize, usize)> = None;
    for v in (0..n).filter(|&v| color[v] == usize::MAX) {
        let mut seen = vec![false; k];
        let mut deg = 0;
        for u in 0..n {
            if adj[v][u] {
                deg += 1;
                if color[u] != usize::MAX {
                    seen[color[u]] = true;
                }
            }
        }
        let sat = seen.iter().filter(|&&b| b).count();
        if pick.is_none_or(|(_, s, d)| (sat, deg) > (s, d)) {
            pick = Some((v, sat, deg));
        }
    }
    let Some((v, _, _)) = pick else {
        return true;
    };
    let max_used = color.iter().filter(|&&c| c != usize::MAX).max().map_or(0, |&c| c + 1);
    for c in 0..k.min(max_used + 1) {
        if (0..n).any(|u| adj[v][u] && color[u] == c) {
            continue;
        }
        color[v] = c;
        if extend(adj, k, color) {
            return true;
        }
    }
    color[v] = usize::MAX;
    false
}

/// Size of the largest clique (Bron-Kerbosch with pivoting).
pub fn max_clique(adj: &[Vec<bool>]) -> usize {
    fn bk(adj: &[Vec<bool>], r: usize, p: Vec<usize>, mut x: Vec<usize>, best: &mut usize) {
        if p.is_empty() {
            if x.is_empty() {
                *best = (*best).max(r);
            }
            return;
        }
        if r + p.len() <= *best {
            return;
        }
        let pivot = *p
            .iter()
            .chain(&x)
            .max_by_key(|&&u| p.iter().filter(|&&v| adj[u][v]).count())
            .expect("non-empty");
        let mut p = p;
        let cands: Vec<usize> = p.iter().copied().filter(|&v| !adj[pivot][v]).collect();
        for v in cands {
            let np = p.iter().copied().filter(|&u| adj[v][u]).collect();
            let nx = x.iter().copied().filter(|&u| adj[v][u]).collect();
            bk(adj, r + 1, np, nx, best);
            p.retain(|&u| u != v);
            x.push(v);
        }
    }
    let mut best = 0;
    bk(adj, 0, (0..adj.len()).collect(), Vec::new(), &mut best);
    best
}

/// Largest set of channels active at one instant over one bus position.
/// Every such set is a clique, so this never exceeds [`max_clique`].
pub fn point_clique(demands: &[Demand]) -> usize {
    let mut times: Vec<u64> = demands.iter().flat_map(|d| d.windows.iter().map(|w| w.0)).collect();
    times.sort_unstable();
    times.dedup();
    let mut best = 0;
    let mut events: Vec<(usize, i32)> = Vec::new();
    for t in times {
        events.clear();
        for d in demands {
            if d.windows.iter().any(|&(a, b)| a <= t && t < b) {
                events.push((d.span.0, 1));
                events.push((d.span.1 + 1, -1));
            }
        }
        // Closings sort before openings at the same position.
        events.sort_unstable();
        let mut open = 0i32;
        for &(_, e) in &events {
            open += e;
            best = best.max(open as usize);
        }
    }
    best
}

/// Chromatic number by enumerating every partition of the vertices into
/// independent sets (restricted growth strings). Exponential; for oracles.
pub fn brute_force_chromatic(adj: &[Vec<bool>]) -> usize {
    fn go(adj: &[Vec<bool>], v: usize, color: &mut Vec<usize>, used: usize, best: &mut usize) {
        if used >= *best {
            return;
        }
        if v == adj.len() {
            *best = used;
            return;
        }
        for c in 0..=used {
            if (0..v).all(|u| !(adj[v][u] && color[u] == c)) {
                color[v] = c;
                go(adj, v + 1, color, used.max(c + 1), best);
            }
        }
    }
    let n = adj.len();
    let mut best = n;
    go(adj, 0, &mut vec![0; n], 0, &mut best);
    best
}
