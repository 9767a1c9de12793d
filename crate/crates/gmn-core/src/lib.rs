//! Numerics for multi-Ooguri-Vafa type hyper-Kahler model geometries.
//!
//! The crate is `no_std` (with `alloc`) and covers exact symplectic-lattice
//! algebra, special functions, the semi-flat and model twistor families of
//! 2-forms, Gibbons-Hawking data, and numerical certificates.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod lattice;
pub mod specfun;
pub mod linalg;
pub mod modeldata;
pub mod verify;
pub mod semiflat;
pub mod modelgeom;
