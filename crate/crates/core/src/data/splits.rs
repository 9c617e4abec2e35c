use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Instance;
use crate::{Error, Label, Result};

/// Per-session instance counts. The default is the study protocol: 10
/// training trials and 2 x 18 test trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub training: usize,
    pub testing: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            training: 10,
            testing: 36,
        }
    }
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.training + self.testing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySplit {
    pub training: Vec<Instance>,
    pub testing: Vec<Instance>,
}

pub fn make_splits(instances: &[Instance], sessions: usize, seed: u64) -> Result<Vec<StudySplit>> {
    make_splits_with(instances, sessions, SplitSizes::default(), seed)
}

/// Draws one split per session. Instances never repeat within a session;
/// different sessions may reuse instances. Training and test sets are each
/// balanced on `Instance::label` when both classes have enough members,
/// otherwise the shortfall is filled from whatever remains.
pub fn make_splits_with(
    instances: &[Instance],
    sessions: usize,
    sizes: SplitSizes,
    seed: u64,
) -> Result<Vec<StudySplit>> {
    if instances.len() < sizes.total() {
        return Err(Error::Capacity(format!(
            "{} instances cannot fill a session of {}",
            instances.len(),
            sizes.total()
        )));
    }
    (0..sessions)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let mut order: Vec<usize> = (0..instances.len()).collect();
            order.shuffle(&mut rng);
            let mut taken = vec![false; instances.len()];
            let mut training = balanced_pick(instances, &order, &mut taken, sizes.training);
            let mut test = balanced_pick(instances, &order, &mut taken, sizes.testing);
            training.shuffle(&mut rng);
            test.shuffle(&mut rng);
            Ok(StudySplit {
                training: training.into_iter().map(|i| instances[i].clone()).collect(),
                testing: test.into_iter().map(|i| instances[i].clone()).collect(),
            })
        })
        .collect()
}

/// Takes `n` untaken indices in `order`, half from each class where possible.
fn balanced_pick(instances: &[Instance], order: &[usize], taken: &mut [bool], n: usize) -> Vec<usize> {
    let mut picked = Vec::with_capacity(n);
    for (c, class) in Label::BOTH.into_iter().enumerate() {
        let quota = n / 2 + (c == 0 && n % 2 == 1) as usize;
        let mut count = 0;
        for &i in order {
            if count == quota {
                break;
            }
            if !taken[i] && instances[i].label == Some(class) {
                taken[i] = true;
                picked.push(i);
                count += 1;
            }
        }
    }
    for &i in order {
        if picked.len() >= n {
            break;
        }
        if !taken[i] {
            taken[i] = true;
            picked.push(i);
        }
    }
    picked
}
