//! Reference catalog of the published ABSA datasets.
//!
//! Counts are example counts per split plus the size of the generated
//! augmentation set for the training split. The datasets themselves are not
//! shipped; these rows seed a registry with names, ids and expected sizes so
//! that user-supplied copies can be checked against them.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub language: &'static str,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub augmented: usize,
    /// Used for adversarial robustness research.
    pub adversarial: bool,
}

const fn row(
    name: &'static str,
    language: &'static str,
    train: usize,
    valid: usize,
    test: usize,
    augmented: usize,
    adversarial: bool,
) -> CatalogEntry {
    CatalogEntry { name, language, train, valid, test, augmented, adversarial }
}

pub const CATALOG: [CatalogEntry; 26] = [
    row("Laptop14", "English", 2328, 0, 638, 13325, false),
    row("Restaurant14", "English", 3604, 0, 1120, 19832, false),
    row("Restaurant15", "English", 1200, 0, 539, 7311, false),
    row("Restaurant16", "English", 1744, 0, 614, 10372, false),
    row("Twitter", "English", 5880, 0, 654, 35227, false),
    row("MAMS", "English", 11181, 1332, 1336, 62665, false),
    row("Television", "English", 3647, 0, 915, 25676, false),
    row("T-shirt", "English", 1834, 0, 465, 15086, false),
    row("Yelp", "English", 808, 0, 245, 2547, false),
    row("Phone", "Chinese", 1740, 0, 647, 0, false),
    row("Car", "Chinese", 862, 0, 284, 0, false),
    row("Notebook", "Chinese", 464, 0, 154, 0, false),
    row("Camera", "Chinese", 1500, 0, 571, 0, false),
    row("MOOC", "Chinese", 1583, 0, 396, 0, false),
    row("Shampoo", "Chinese", 6810, 0, 915, 0, false),
    row("MOOC-En", "English", 1492, 0, 459, 10562, false),
    row("Arabic", "Arabic", 9620, 0, 2372, 0, false),
    row("Dutch", "Dutch", 1283, 0, 394, 0, false),
    row("Spanish", "Spanish", 1928, 0, 731, 0, false),
    row("Turkish", "Turkish", 1385, 0, 146, 0, false),
    row("Russian", "Russian", 3157, 0, 969, 0, false),
    row("French", "French", 1769, 0, 718, 0, false),
    row("ARTS-Laptop14", "English", 2328, 638, 1877, 13325, true),
    row("ARTS-Restaurant14", "English", 3604, 1120, 3448, 19832, true),
    row("Kaggle", "English", 3376, 0, 866, 0, true),
    row("Chinese-Restaurant", "Chinese", 26119, 3638, 7508, 0, true),
];

pub fn find(name: &str) -> Option<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.name.eq_ignore_ascii_case(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laptop14_row() {
        let e = find("laptop14").unwrap();
        assert_eq!((e.train, e.valid, e.test, e.augmented), (2328, 0, 638, 13325));
        assert_eq!(CATALOG.iter().filter(|e| e.adversarial).count(), 4);
    }
}
