"""Inner approximations of nonnegative polynomials and psd matrices via LP/SOCP."""

__version__ = "0.1.0"
