# Generated by Django 5.2 on 2026-10-19 09:12

import django.db.models.deletion
from django.db import migrations, models


GARMENT_CHOICES = [
    ('shirt', 'Shirt'), ('sock', 'Sock'), ('trousers', 'Trousers'),
    ('underwear', 'Underwear'), ('other', 'Other'), ('empty', 'Empty'),
]


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='CellRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('seed', models.BigIntegerField()),
                ('scene_name', models.CharField(blank=True, max_length=100)),
                ('backend_kind', models.CharField(choices=[('mock', 'Mock profile'), ('live', 'Live chat server'), ('replay', 'Replay log')], max_length=10)),
                ('model_name', models.CharField(max_length=100)),
                ('item_count', models.PositiveIntegerField()),
                ('cycles', models.PositiveIntegerField(default=0)),
                ('candidate_requests', models.PositiveIntegerField(default=0)),
                ('transitions', models.PositiveIntegerField(default=0)),
                ('shutdown_reason', models.CharField(blank=True, max_length=200)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='CycleRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('index', models.PositiveIntegerField()),
                ('item_id', models.CharField(max_length=40)),
                ('true_class', models.CharField(choices=GARMENT_CHOICES, max_length=10)),
                ('predicted', models.CharField(blank=True, max_length=40)),
                ('destination_bin', models.CharField(choices=GARMENT_CHOICES, max_length=10)),
                ('candidate_retries', models.PositiveIntegerField(default=0)),
                ('pick_retries', models.PositiveIntegerField(default=0)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='cycle_records', to='cell.cellrun')),
            ],
            options={
                'ordering': ['run', 'index'],
                'constraints': [models.UniqueConstraint(fields=('run', 'index'), name='unique_cycle_per_run')],
            },
        ),
    ]
