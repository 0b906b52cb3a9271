"""Two short trajectories, their LCS and indel distance, and the DP table."""

from trajmine.distance import dissimilarity, lcs_length

P1 = ("BLD", "INF", "RSP", "DTH")
P2 = ("BLD", "BLD", "INF")


def lcs_table(a, b):
    t = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i, x in enumerate(a, 1):
        for j, y in enumerate(b, 1):
            t[i][j] = t[i - 1][j - 1] + 1 if x == y else max(t[i - 1][j], t[i][j - 1])
    return t


def main():
    print("P1:", " -> ".join(P1))
    print("P2:", " -> ".join(P2))
    print("\n      " + " ".join(f"{c:>4}" for c in ("", *P2)))
    for label, row in zip(("", *P1), lcs_table(P1, P2)):
        print(f"{label:>5} " + " ".join(f"{v:>4}" for v in row))
    print(f"\nLCS = {lcs_length(P1, P2)}, d = |P1| + |P2| - 2*LCS = {dissimilarity(P1, P2)}")


if __name__ == "__main__":
    main()
