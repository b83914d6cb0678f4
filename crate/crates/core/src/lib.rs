pub mod calib;
pub mod clean;
pub mod clock;
pub mod correlate;
pub mod frame;
pub mod fseq;
pub mod kv;
pub mod node;
pub mod sensor;
pub mod series;
pub mod store;
pub mod traffic;
