use super::structure::ChoiceStructure;

/// Observed category implied by the latent utilities of one choice.
///
/// Returns 0 when no utility is strictly positive, otherwise the 1-based
/// index of the largest utility (lowest index on exact ties).
pub fn outcome_from_utilities(z: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = 0.0;
    for (j, &v) in z.iter().enumerate() {
        if v > best_val {
            best = j + 1;
            best_val = v;
        }
    }
    best
}

/// Whether `z_ik` reproduces `y_ik`.
#[inline]
pub fn consistent(y: usize, z: &[f64]) -> bool {
    outcome_from_utilities(z) == y
}

/// `Π_k 1{y_ik consistent with z_ik}` for one observation, `z_i` stacked over choices.
pub fn indicator_y_given_z(structure: &ChoiceStructure, y: &[usize], z: &[f64]) -> u8 {
    first_inconsistent(structure, y, z).is_none() as u8
}

/// First choice whose utilities disagree with the observed category.
pub fn first_inconsistent(structure: &ChoiceStructure, y: &[usize], z: &[f64]) -> Option<usize> {
    let mut offset = 0;
    for k in 0..structure.num_choices() {
        let j_k = structure.alternatives(k);
        if !consistent(y[k], &z[offset..offset + j_k]) {
            return Some(k);
        }
        offset += j_k;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn outcome_examples() {
        assert_eq!(outcome_from_utilities(&[-1.0, -2.0]), 0);
        assert_eq!(outcome_from_utilities(&[0.5, 1.2]), 2);
        assert_eq!(outcome_from_utilities(&[0.0, -0.3]), 0);
        assert_eq!(outcome_from_utilities(&[0.4, 0.4]), 1);
    }

    #[test]
    fn indicator_examples() {
        let one = ChoiceStructure::new(vec![2], 0, 0).unwrap();
        assert_eq!(indicator_y_given_z(&one, &[0], &[-0.1, -0.1]), 1);
        assert_eq!(indicator_y_given_z(&one, &[1], &[0.2, 0.9]), 0);
        let two = ChoiceStructure::new(vec![2, 1], 0, 0).unwrap();
        assert_eq!(indicator_y_given_z(&two, &[2, 1], &[0.2, 0.9, -1.0]), 0);
        assert_eq!(indicator_y_given_z(&two, &[2, 0], &[0.2, 0.9, -1.0]), 1);
    }

    proptest! {
        #[test]
        fn positive_scaling_preserves_outcome(
            z in prop::collection::vec(-5.0f64..5.0, 1..6),
            c in 1e-3f64..1e3,
        ) {
            let scaled: Vec<f64> = z.iter().map(|v| v * c).collect();
            prop_assert_eq!(outcome_from_utilities(&z), outcome_from_utilities(&scaled));
        }
    }
}
