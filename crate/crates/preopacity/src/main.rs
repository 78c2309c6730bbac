fn main() {
    // die quietly on a closed pipe (`preopacity ... | head`) instead of
    // panicking: restore the default SIGPIPE disposition Rust masks
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(preopacity::cli::run());
}
