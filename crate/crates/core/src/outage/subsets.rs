use crate::error::{Error, Result};

use super::MAX_EXACT_RELAYS;

/// Relay subsets used by the outage sums.
///
/// `by_size[n]` lists every `n`-element subset of the `N` relays as a bit
/// mask. `positional[n][tau]` lists every `tau`-element subset of an
/// `n`-element set as a mask over positions `0..n`, so that the second-hop
/// subsets of a given first-hop set can be enumerated without rebuilding
/// tables.
#[derive(Debug, Clone)]
pub struct SubsetTables {
    users: usize,
    relays: usize,
    by_size: Vec<Vec<u32>>,
    positional: Vec<Vec<Vec<u32>>>,
}

impl SubsetTables {
    pub fn new(users: usize, relays: usize) -> Result<Self> {
        if relays > MAX_EXACT_RELAYS {
            return Err(Error::TooManyRelays {
                relays,
                limit: MAX_EXACT_RELAYS,
            });
        }
        if relays < users || users == 0 {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= M <= N, got M={users}, N={relays}"
            )));
        }
        let by_size = masks_by_size(relays);
        let positional = (0..=relays)
            .map(|n| {
                let sizes = masks_by_size(n);
                sizes.into_iter().take(users.min(n + 1)).collect()
            })
            .collect();
        Ok(SubsetTables {
            users,
            relays,
            by_size,
            positional,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn relays(&self) -> usize {
        self.relays
    }

    pub fn subsets_of_size(&self, n: usize) -> &[u32] {
        &self.by_size[n]
    }

    /// Position masks of size `tau` within an `n`-element set (`tau < M`).
    pub fn positional_subsets(&self, n: usize, tau: usize) -> &[u32] {
        &self.positional[n][tau]
    }
}

fn masks_by_size(n: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new(); n + 1];
    for mask in 0u32..(1u32 << n) {
        out[mask.count_ones() as usize].push(mask);
    }
    out
}

/// Members of `mask` in increasing order.
pub(crate) fn members(mask: u32) -> impl Iterator<Item = usize> {
    let mut rest = mask;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(j)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::binomial;

    #[test]
    fn counts_are_binomial() {
        let t = SubsetTables::new(3, 6).unwrap();
        for n in 0..=6 {
            assert_eq!(t.subsets_of_size(n).len(), binomial(6, n));
            for tau in 0..3.min(n + 1) {
                assert_eq!(t.positional_subsets(n, tau).len(), binomial(n, tau));
            }
        }
    }

    #[test]
    fn members_in_order() {
        let members: Vec<usize> = members(0b10110).collect();
        assert_eq!(members, vec![1, 2, 4]);
    }

    #[test]
    fn too_many_relays_rejected() {
        assert!(matches!(
            SubsetTables::new(1, 21),
            Err(Error::TooManyRelays { .. })
        ));
        assert!(SubsetTables::new(3, 2).is_err());
    }
}
