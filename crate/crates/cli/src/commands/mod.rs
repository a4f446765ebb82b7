pub mod enhance;
pub mod fuse;
pub mod rover;
pub mod score;
pub mod simulate;
