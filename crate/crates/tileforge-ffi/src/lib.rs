//! C ABI for the tileforge toolkit (placeholder, filled in once the core is done).
