//! Alternative augmentation by mutual recommendation between segments.
//!
//! Segment `j` of an action queries the training set for the action whose
//! `j`-th segment is closest; every segment `t` of that winner becomes the
//! alternative that `j` recommends to segment `t`. One query per position
//! therefore yields all T² alternatives of an action.

mod augment;
mod index;
mod kdtree;

pub use augment::{
    augment_action, augment_actions, augment_dataset, recommend, AugmentOptions,
    AugmentedAction, AugmentedSegment, Alternative,
};
pub use index::{nearest_training_action, Backend, Neighbor, RetrievalIndex};
