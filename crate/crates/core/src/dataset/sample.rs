use rand::seq::SliceRandom;

use super::image::{ClassId, Image};
use super::stream::{class_pools, draw};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// A labeled example: an index into the source dataset plus its class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledExample {
    pub index: usize,
    pub class: ClassId,
}

/// Labeled examples drawn from a fixed set of classes, `L(t)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    /// Sorted, deduplicated.
    pub classes: Vec<ClassId>,
    pub examples: Vec<LabeledExample>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter<'a>(
        &'a self,
        dataset: &'a [Image],
    ) -> impl Iterator<Item = (&'a Image, ClassId)> + 'a {
        self.examples
            .iter()
            .map(move |e| (&dataset[e.index], e.class))
    }

    pub fn count(&self, class: ClassId) -> usize {
        self.examples.iter().filter(|e| e.class == class).count()
    }
}

fn sorted_classes(classes: &[ClassId]) -> Vec<ClassId> {
    let mut c = classes.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

/// `per_class` examples of every class in `classes`, without replacement.
pub fn sample_labeled_set(
    dataset: &[Image],
    classes: &[ClassId],
    per_class: usize,
    seed: u64,
) -> Result<LabeledSet> {
    let classes = sorted_classes(classes);
    let pools = class_pools(dataset);
    let mut rng = seeded(seed);
    let mut examples = Vec::with_capacity(per_class * classes.len());
    for &c in &classes {
        let pool = pools.get(&c).map(Vec::as_slice).unwrap_or(&[]);
        if pool.len() < per_class {
            return Err(Error::Config(format!(
                "class {c} has {} examples, {per_class} requested",
                pool.len()
            )));
        }
        examples.extend(
            draw(pool, per_class, &mut rng)
                .into_iter()
                .map(|index| LabeledExample { index, class: c }),
        );
    }
    Ok(LabeledSet { classes, examples })
}

/// Test examples; same contract as [`sample_labeled_set`], conventionally 100 per class.
pub fn sample_test_set(
    dataset: &[Image],
    classes: &[ClassId],
    per_class: usize,
    seed: u64,
) -> Result<LabeledSet> {
    sample_labeled_set(dataset, classes, per_class, seed)
}

/// Labeled and test sets drawn from the same split without overlap.
///
/// Each class pool is permuted once; the labeled set takes the head of the
/// permutation and the test set the next `test_per_class` entries.
pub fn sample_disjoint_sets(
    dataset: &[Image],
    classes: &[ClassId],
    labeled_per_class: usize,
    test_per_class: usize,
    seed: u64,
) -> Result<(LabeledSet, LabeledSet)> {
    let classes = sorted_classes(classes);
    let pools = class_pools(dataset);
    let mut rng = seeded(seed);
    let mut labeled = Vec::new();
    let mut test = Vec::new();
    for &c in &classes {
        let mut pool = pools.get(&c).cloned().unwrap_or_default();
        let need = labeled_per_class + test_per_class;
        if pool.len() < need {
            return Err(Error::Config(format!(
                "class {c} has {} examples, {need} requested",
                pool.len()
            )));
        }
        pool.shuffle(&mut rng);
        let ex = |&index: &usize| LabeledExample { index, class: c };
        labeled.extend(pool[..labeled_per_class].iter().map(ex));
        test.extend(pool[labeled_per_class..need].iter().map(ex));
    }
    Ok((
        LabeledSet {
            classes: classes.clone(),
            examples: labeled,
        },
        LabeledSet {
            classes,
            examples: test,
        },
    ))
}
