//! End-to-end acceptance checks for `nlcs-core`. Everything lives in
//! `tests/`; this package sorts after the library so its tests run last.
