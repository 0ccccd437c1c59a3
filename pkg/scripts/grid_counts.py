"""Node counts of the 2-D Clenshaw-Curtis grids at level 5 under every level convention.

    python scripts/grid_counts.py
"""
from klplf import sparse_grid as sg


def main():
    print(f"tensor: {sg.assemble('tensor', 'cc', 4, 2).n_nodes}")
    print(f"{'convention':<12}{'isotropic':>10}{'gamma=(1,2)':>13}")
    for name, fn in sg.LEVEL_CONVENTIONS.items():
        w, cap = fn(5)
        iso = sg.assemble("isotropic", "cc", w, 2, None, cap).n_nodes
        ani = sg.assemble("anisotropic", "cc", w, 2, (1, 2), cap).n_nodes
        print(f"{name:<12}{iso:>10}{ani:>13}")


if __name__ == "__main__":
    main()
