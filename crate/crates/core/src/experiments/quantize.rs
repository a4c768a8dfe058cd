//! Rounding time shares onto a slot grid.

use crate::wsum::{Allocation, Share};

/// Rounds every time share to a multiple of `1/slots` by largest-remainder
/// apportionment of `round(Στ·slots)` slots (never more than `slots`).
/// Allocations with at most one active user are returned unchanged.
pub fn quantize_time(alloc: &Allocation, slots: usize) -> Allocation {
    if slots == 0 || alloc.active_users() <= 1 {
        return alloc.clone();
    }
    let n = slots as f64;
    let shares = alloc.shares();
    let total_units = ((alloc.total_time() * n).round() as usize).min(slots);
    let mut units: Vec<usize> = shares
        .iter()
        .map(|s| (s.tau * n).floor() as usize)
        .collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    // stable sort keeps the lower index first on equal remainders
    order.sort_by(|&a, &b| {
        let ra = shares[a].tau * n - units[a] as f64;
        let rb = shares[b].tau * n - units[b] as f64;
        rb.total_cmp(&ra)
    });
    let mut assigned: usize = units.iter().sum();
    for &i in order.iter().cycle().take(shares.len() * 2) {
        if assigned >= total_units {
            break;
        }
        units[i] += 1;
        assigned += 1;
    }
    while assigned > total_units {
        // only reachable through floating-point slack; trim the smallest remainder
        let i = *order.last().unwrap();
        if units[i] > 0 {
            units[i] -= 1;
            assigned -= 1;
        } else {
            break;
        }
    }
    let out: Vec<Share> = shares
        .iter()
        .zip(&units)
        .map(|(s, &u)| Share {
            tau: u as f64 / n,
            ..*s
        })
        .collect();
    Allocation::from_shares_unchecked(alloc.users(), out)
}
