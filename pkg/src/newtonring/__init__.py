"""All roots of recursively defined polynomials by iterated-refinement Newton."""
