pub mod evaluate;
pub mod fit;
pub mod selftest;
pub mod simulate;
