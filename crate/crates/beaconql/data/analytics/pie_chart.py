# Count individuals per karyotypic sex
counts = data["karyotypic_sex"].value_counts().sort_index()
print(counts.to_string())

# Pie chart of the counts
fig, ax = plt.subplots(figsize=(5, 5))
ax.pie(counts.values, labels=counts.index, autopct="%1.1f%%", startangle=90)
ax.set_title("Karyotypic sex")
fig.savefig("/tmp/karyotypic_sex_pie.png", bbox_inches="tight")
