# Generated by Django 5.2 on 2026-10-19 09:40

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='BenchmarkRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('model_name', models.CharField(max_length=100)),
                ('hardware', models.CharField(blank=True, max_length=50)),
                ('backend_kind', models.CharField(blank=True, max_length=10)),
                ('dataset_size', models.PositiveIntegerField()),
                ('overall_accuracy', models.FloatField(blank=True, null=True)),
                ('failed_calls', models.PositiveIntegerField(default=0)),
                ('mean_latency_s', models.FloatField(blank=True, null=True)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='ResponseRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('record_id', models.CharField(max_length=100)),
                ('ground_truth', models.CharField(choices=[('shirt', 'Shirt'), ('sock', 'Sock'), ('trousers', 'Trousers'), ('underwear', 'Underwear'), ('other', 'Other'), ('empty', 'Empty')], max_length=10)),
                ('raw', models.TextField(blank=True)),
                ('parsed', models.CharField(max_length=40)),
                ('latency_s', models.FloatField()),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='responses', to='bench.benchmarkrun')),
            ],
            options={
                'ordering': ['run', 'id'],
                'constraints': [models.UniqueConstraint(fields=('run', 'record_id'), name='unique_response_per_run')],
            },
        ),
    ]
