//! Attribute schemas and the category-attribute matrix.
//!
//! Each raw attribute with `alpha_i` possible values is one-hot coded into a
//! group of width `alpha_i`; the coded width `m` is the sum of group widths.
//! A category is described by one row of the category-attribute matrix: the
//! concatenation of its per-group one-hot codes.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::Matrix;

/// One-hot layout of the raw attributes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    cardinalities: Vec<usize>,
    offsets: Vec<usize>,
    coded_width: usize,
}

impl AttributeSchema {
    pub fn new(cardinalities: &[usize]) -> Result<Self> {
        if cardinalities.is_empty() {
            return Err(CoreError::SchemaMismatch("schema needs at least one attribute".into()));
        }
        if let Some(&bad) = cardinalities.iter().find(|&&a| a < 2) {
            return Err(CoreError::SchemaMismatch(format!(
                "attribute cardinality must be at least 2, got {bad}"
            )));
        }
        let mut offsets = Vec::with_capacity(cardinalities.len());
        let mut acc = 0;
        for &a in cardinalities {
            offsets.push(acc);
            acc += a;
        }
        Ok(Self {
            cardinalities: cardinalities.to_vec(),
            offsets,
            coded_width: acc,
        })
    }

    /// Number of raw attributes (groups).
    pub fn group_count(&self) -> usize {
        self.cardinalities.len()
    }

    /// Total one-hot coded width `m`.
    pub fn coded_width(&self) -> usize {
        self.coded_width
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    /// `(offset, width)` of group `i` in the coded layout.
    pub fn group(&self, i: usize) -> (usize, usize) {
        (self.offsets[i], self.cardinalities[i])
    }

    pub fn groups(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.offsets.iter().copied().zip(self.cardinalities.iter().copied())
    }

    /// One-hot encodes raw per-attribute value indices.
    pub fn encode(&self, raw: &[usize]) -> Result<Vec<f64>> {
        if raw.len() != self.group_count() {
            return Err(CoreError::InvalidAttribute(format!(
                "expected {} attribute values, got {}",
                self.group_count(),
                raw.len()
            )));
        }
        let mut coded = vec![0.0; self.coded_width];
        for (i, &value) in raw.iter().enumerate() {
            let (offset, width) = self.group(i);
            if value >= width {
                return Err(CoreError::InvalidAttribute(format!(
                    "attribute {i} value {value} out of range 0..{width}"
                )));
            }
            coded[offset + value] = 1.0;
        }
        Ok(coded)
    }

    /// Inverse of [`encode`](Self::encode) on valid rows.
    pub fn decode(&self, coded: &[f64]) -> Result<Vec<usize>> {
        self.validate_row(coded)?;
        Ok(self
            .groups()
            .map(|(offset, width)| {
                coded[offset..offset + width]
                    .iter()
                    .position(|&v| v == 1.0)
                    .expect("validated one-hot")
            })
            .collect())
    }

    /// Checks that `row` is an exact per-group one-hot concatenation.
    pub fn validate_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.coded_width {
            return Err(CoreError::SchemaMismatch(format!(
                "row width {} does not match coded width {}",
                row.len(),
                self.coded_width
            )));
        }
        for (i, (offset, width)) in self.groups().enumerate() {
            let group = &row[offset..offset + width];
            let ones = group.iter().filter(|&&v| v == 1.0).count();
            let zeros = group.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || zeros != width - 1 {
                return Err(CoreError::SchemaMismatch(format!(
                    "group {i} is not one-hot: {group:?}"
                )));
            }
        }
        Ok(())
    }

    /// Sub-schema over the given groups, in the given order.
    pub fn subset(&self, groups: &[usize]) -> Result<Self> {
        let cards: Vec<usize> = groups
            .iter()
            .map(|&g| {
                self.cardinalities
                    .get(g)
                    .copied()
                    .ok_or_else(|| CoreError::SchemaMismatch(format!("no attribute group {g}")))
            })
            .collect::<Result<_>>()?;
        Self::new(&cards)
    }

    /// Schema for `[self | other]` column concatenation.
    pub fn concat(&self, other: &Self) -> Self {
        let mut cards = self.cardinalities.clone();
        cards.extend_from_slice(&other.cardinalities);
        Self::new(&cards).expect("concat of valid schemas")
    }
}

/// Class-level attribute descriptions: row `j` codes category `j`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FaultAttributeMatrix {
    matrix: Matrix,
    schema: AttributeSchema,
}

impl FaultAttributeMatrix {
    /// Validates every row against the schema and requires pairwise distinct
    /// rows: categories must be attribute-distinguishable.
    pub fn new(matrix: Matrix, schema: AttributeSchema) -> Result<Self> {
        if matrix.cols() != schema.coded_width() {
            return Err(CoreError::SchemaMismatch(format!(
                "attribute matrix width {} does not match schema width {}",
                matrix.cols(),
                schema.coded_width()
            )));
        }
        for i in 0..matrix.rows() {
            schema.validate_row(matrix.row(i))?;
            for j in 0..i {
                if matrix.row(i) == matrix.row(j) {
                    return Err(CoreError::InvalidAttribute(format!(
                        "categories {j} and {i} share an identical attribute row"
                    )));
                }
            }
        }
        Ok(Self { matrix, schema })
    }

    pub fn from_raw_tuples(tuples: &[Vec<usize>], schema: AttributeSchema) -> Result<Self> {
        let rows: Vec<Vec<f64>> = tuples
            .iter()
            .map(|t| schema.encode(t))
            .collect::<Result<_>>()?;
        let matrix = Matrix::from_rows(&rows)?;
        Self::new(matrix, schema)
    }

    pub fn categories(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn row(&self, category: usize) -> Result<&[f64]> {
        if category >= self.matrix.rows() {
            return Err(CoreError::InvalidInput(format!(
                "unknown category {category} (have {})",
                self.matrix.rows()
            )));
        }
        Ok(self.matrix.row(category))
    }

    /// Rows for the given categories, stacked in the given order.
    pub fn select(&self, categories: &[usize]) -> Result<Matrix> {
        for &c in categories {
            self.row(c)?;
        }
        Ok(self.matrix.select_rows(categories))
    }

    /// Attribute-label matrix for a label vector: row `i` is the attribute
    /// row of `labels[i]`.
    pub fn labels_to_attributes(&self, labels: &[usize]) -> Result<Matrix> {
        self.select(labels)
    }

    /// Column view restricted to the leading `width` coded columns. Stage
    /// prefixes may contain duplicate rows, so no distinctness check here.
    pub fn column_prefix(&self, width: usize) -> Matrix {
        self.matrix.slice_cols(0, width)
    }

    /// Reorders coded columns to `[groups...]` order, returning the matrix
    /// and matching schema. Used by attribute-increment stage layouts.
    pub fn reorder_groups(&self, groups: &[usize]) -> Result<(Matrix, AttributeSchema)> {
        let schema = self.schema.subset(groups)?;
        let mut cols_order = Vec::with_capacity(schema.coded_width());
        for &g in groups {
            let (offset, width) = self.schema.group(g);
            cols_order.extend(offset..offset + width);
        }
        let mut data = Vec::with_capacity(self.matrix.rows() * cols_order.len());
        for i in 0..self.matrix.rows() {
            let row = self.matrix.row(i);
            data.extend(cols_order.iter().map(|&c| row[c]));
        }
        let m = Matrix::from_vec(self.matrix.rows(), cols_order.len(), data)?;
        Ok((m, schema))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hydraulic_layout_has_coded_width_14() {
        let schema = AttributeSchema::new(&[3, 4, 3, 4]).unwrap();
        assert_eq!(schema.group_count(), 4);
        assert_eq!(schema.coded_width(), 14);
    }

    #[test]
    fn encode_places_ones_at_group_offsets() {
        let schema = AttributeSchema::new(&[3, 4, 3, 4]).unwrap();
        let coded = schema.encode(&[0, 0, 0, 0]).unwrap();
        let mut expected = vec![0.0; 14];
        for p in [0, 3, 7, 10] {
            expected[p] = 1.0;
        }
        assert_eq!(coded, expected);
    }

    #[test]
    fn encode_binary_attribute() {
        let schema = AttributeSchema::new(&[2]).unwrap();
        assert_eq!(schema.encode(&[1]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn out_of_range_value_is_rejected() {
        let schema = AttributeSchema::new(&[3, 4]).unwrap();
        assert!(schema.encode(&[3, 0]).is_err());
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let schema = AttributeSchema::new(&[2, 2]).unwrap();
        let rows = vec![
            schema.encode(&[0, 1]).unwrap(),
            schema.encode(&[0, 1]).unwrap(),
        ];
        let m = Matrix::from_rows(&rows).unwrap();
        assert!(FaultAttributeMatrix::new(m, schema).is_err());
    }

    #[test]
    fn group_reordering_keeps_one_hot_structure() {
        let schema = AttributeSchema::new(&[2, 3, 2]).unwrap();
        let fam = FaultAttributeMatrix::from_raw_tuples(
            &[vec![0, 2, 1], vec![1, 0, 0]],
            schema,
        )
        .unwrap();
        let (m, sub) = fam.reorder_groups(&[2, 0]).unwrap();
        assert_eq!(sub.cardinalities(), &[2, 2]);
        assert_eq!(m.row(0), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(m.row(1), &[1.0, 0.0, 0.0, 1.0]);
    }

    proptest! {
        // encode then decode is the identity on valid raw tuples.
        #[test]
        fn encode_decode_roundtrip(values in proptest::collection::vec(0usize..4, 1..6)) {
            let cards: Vec<usize> = values.iter().map(|_| 4usize).collect();
            let schema = AttributeSchema::new(&cards).unwrap();
            let coded = schema.encode(&values).unwrap();
            schema.validate_row(&coded).unwrap();
            prop_assert_eq!(schema.decode(&coded).unwrap(), values);
        }
    }
}
