use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub const OCC_UNKNOWN: u8 = 0;
pub const OCC_OCCUPIED: u8 = 1;
pub const OCC_FREE: u8 = 2;

pub const SEM_UNKNOWN: u8 = 0;
pub const SEM_FLOOR: u8 = 1;
pub const SEM_WALL: u8 = 2;

/// Occupancy and semantic label sets. Index 0 is `unknown` in both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCatalog {
    pub occupancy_classes: Vec<String>,
    pub semantic_classes: Vec<String>,
}

impl Default for ClassCatalog {
    fn default() -> Self {
        Self::with_objects(&["bed", "chair", "cushion", "sofa", "counter", "table"])
    }
}

impl ClassCatalog {
    /// Number of structural semantic classes (unknown, floor, wall) that
    /// precede the object classes.
    pub const STRUCTURAL: usize = 3;

    pub fn with_objects(objects: &[&str]) -> Self {
        assert!(
            !objects.is_empty(),
            "catalog needs at least one object class"
        );
        let mut semantic_classes: Vec<String> = ["unknown", "floor", "wall"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        semantic_classes.extend(objects.iter().map(|s| s.to_string()));
        Self {
            occupancy_classes: ["unknown", "occupied", "free"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            semantic_classes,
        }
    }

    pub fn occupancy_len(&self) -> usize {
        self.occupancy_classes.len()
    }

    pub fn semantic_len(&self) -> usize {
        self.semantic_classes.len()
    }

    /// True for navigable target classes (everything but unknown/floor/wall).
    pub fn is_object(&self, class: u8) -> bool {
        class > SEM_WALL && (class as usize) < self.semantic_len()
    }

    pub fn object_classes(&self) -> Vec<u8> {
        (SEM_WALL + 1..self.semantic_len() as u8).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<u8> {
        self.semantic_classes
            .iter()
            .position(|s| s == name)
            .map(|i| i as u8)
    }

    pub fn is_valid(&self) -> bool {
        self.occupancy_classes == ["unknown", "occupied", "free"]
            && self.semantic_len() >= 4
            && self.semantic_classes[..3] == ["unknown", "floor", "wall"]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_has_nine_semantic_classes() {
        let c = ClassCatalog::default();
        assert!(c.is_valid());
        assert_eq!(c.semantic_len(), 9);
        assert_eq!(c.index_of("table"), Some(8));
        assert_eq!(c.object_classes().len(), 6);
        assert!(!c.is_object(SEM_WALL));
    }
}
