//! Bipartite device/RB matching (Kuhn's augmenting paths).
//!
//! Used to decide whether every device can still receive one eligible RB, which is the
//! feasibility core of the assignment problem.

#[derive(Debug, Clone)]
pub(crate) struct Matching {
    device_rb: Vec<Option<usize>>,
    rb_device: Vec<Option<usize>>,
}

impl Matching {
    /// Maximum matching of all devices into the available RBs.
    pub fn maximum(eligible: &[Vec<bool>], available: &[bool]) -> Self {
        let mut m = Matching {
            device_rb: vec![None; eligible.len()],
            rb_device: vec![None; available.len()],
        };
        for d in 0..eligible.len() {
            let mut visited = vec![false; available.len()];
            m.augment(d, eligible, available, &mut visited);
        }
        m
    }

    pub fn rb_of(&self, device: usize) -> Option<usize> {
        self.device_rb[device]
    }

    /// Drops `device` from the matching, freeing its RB.
    pub fn release_device(&mut self, device: usize) {
        if let Some(rb) = self.device_rb[device].take() {
            self.rb_device[rb] = None;
        }
    }

    /// Called after `available[rb]` was cleared: re-routes the device matched to `rb`, if
    /// any. Returns false, leaving the matching untouched, when that device cannot be
    /// re-matched.
    pub fn try_claim(&mut self, rb: usize, eligible: &[Vec<bool>], available: &[bool]) -> bool {
        let Some(owner) = self.rb_device[rb] else {
            return true;
        };
        self.rb_device[rb] = None;
        self.device_rb[owner] = None;
        let mut visited = vec![false; available.len()];
        if self.augment(owner, eligible, available, &mut visited) {
            true
        } else {
            self.rb_device[rb] = Some(owner);
            self.device_rb[owner] = Some(rb);
            false
        }
    }

    fn augment(&mut self, d: usize, eligible: &[Vec<bool>], available: &[bool], visited: &mut [bool]) -> bool {
        for j in 0..available.len() {
            if !eligible[d][j] || !available[j] || visited[j] {
                continue;
            }
            visited[j] = true;
            let free = match self.rb_device[j] {
                None => true,
                Some(other) => self.augment(other, eligible, available, visited),
            };
            if free {
                self.rb_device[j] = Some(d);
                self.device_rb[d] = Some(j);
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn size(m: &Matching) -> usize {
        m.device_rb.iter().flatten().count()
    }

    #[test]
    fn finds_perfect_matching_through_augmenting_path() {
        // d0 can use {0,1}, d1 only {0}: greedy d0->0 must be re-routed.
        let e = vec![vec![true, true], vec![true, false]];
        let m = Matching::maximum(&e, &[true, true]);
        assert_eq!(size(&m), 2);
        assert_eq!(m.rb_of(1), Some(0));
        assert_eq!(m.rb_of(0), Some(1));
    }

    #[test]
    fn pigeonhole_leaves_one_unmatched() {
        let e = vec![vec![true], vec![true]];
        assert_eq!(size(&Matching::maximum(&e, &[true])), 1);
    }

    #[test]
    fn claim_reroutes_or_refuses() {
        let e = vec![vec![true, true], vec![true, false]];
        let mut avail = vec![true, true];
        let mut m = Matching::maximum(&e, &avail);
        m.release_device(0);
        // d0 leaves; taking rb0 would strand d1.
        avail[0] = false;
        assert!(!m.try_claim(0, &e, &avail));
        assert_eq!(m.rb_of(1), Some(0));
        avail[0] = true;
        avail[1] = false;
        assert!(m.try_claim(1, &e, &avail));
    }
}
