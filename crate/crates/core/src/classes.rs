//! The fixed household object class set.

pub type ClassId = usize;

pub const NUM_CLASSES: usize = 6;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "toilet",
    "couch",
    "bed",
    "dining table",
    "potted plant",
    "tv",
];

pub const TOILET: ClassId = 0;
pub const COUCH: ClassId = 1;
pub const BED: ClassId = 2;
pub const DINING_TABLE: ClassId = 3;
pub const POTTED_PLANT: ClassId = 4;
pub const TV: ClassId = 5;

pub fn class_name(class_id: ClassId) -> &'static str {
    CLASS_NAMES.get(class_id).copied().unwrap_or("unknown")
}
