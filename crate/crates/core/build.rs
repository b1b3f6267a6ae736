// Link the system OpenBLAS, which provides the BLAS, CBLAS, and LAPACK
// symbols that ndarray and ndarray-linalg bind against. The pre-packaged
// backend features of ndarray-linalg insist on libraries (libcblas,
// libgfortran dev symlinks) that plain Debian/Ubuntu images lack, so the
// crate links the one library that carries everything instead.
fn main() {
    println!("cargo:rustc-link-lib=dylib=openblas");
    println!("cargo:rustc-link-search=native=/usr/lib/x86_64-linux-gnu");
}
