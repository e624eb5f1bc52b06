use eshaper_core::vibrational::{triatomic_ring_surrogate, write_vibrational_text};

fn main() {
    let set = triatomic_ring_surrogate(0.25, 0.10, 440.0, 14.007, 1.008, 0.3);
    print!("{}", write_vibrational_text(&set));
}
